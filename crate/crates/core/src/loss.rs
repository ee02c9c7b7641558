// SPDX-License-Identifier: Apache-2.0

//! Training losses as pure functions: a weighted Euclidean saliency loss, a multinomial
//! logistic subitizing loss, and their masked combination.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Probabilities are floored here before taking the log.
pub const LOG_FLOOR: f64 = 1e-12;

/// Salient object count bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CountCategory {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3+")]
    ThreePlus,
}

impl CountCategory {
    pub const ALL: [CountCategory; 4] = [
        CountCategory::Zero,
        CountCategory::One,
        CountCategory::Two,
        CountCategory::ThreePlus,
    ];

    pub fn from_count(n: usize) -> Self {
        match n {
            0 => Self::Zero,
            1 => Self::One,
            2 => Self::Two,
            _ => Self::ThreePlus,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| invalid(format!("count category index {i} outside 0..=3")))
    }

    /// Smallest count in the bucket (`3+` maps to 3).
    pub fn min_count(self) -> usize {
        self.index()
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Zero => "0",
            Self::One => "1",
            Self::Two => "2",
            Self::ThreePlus => "3+",
        }
    }
}

impl std::str::FromStr for CountCategory {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0" => Ok(Self::Zero),
            "1" => Ok(Self::One),
            "2" => Ok(Self::Two),
            "3+" | "3" => Ok(Self::ThreePlus),
            other => Err(invalid(format!(
                "unknown count category {other:?}, expected 0, 1, 2 or 3+"
            ))),
        }
    }
}

impl std::fmt::Display for CountCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Predicted distribution over `{0, 1, 2, 3+}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountDistribution<T> {
    probs: [T; 4],
}

impl<T: Scalar> CountDistribution<T> {
    pub fn new(probs: [T; 4]) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
            return Err(invalid("count probabilities must lie in [0, 1]"));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > T::of(1e-6) {
            return Err(invalid(format!("count probabilities sum to {total}, expected 1")));
        }
        Ok(Self { probs })
    }

    pub fn one_hot(n: CountCategory) -> Self {
        let mut probs = [T::zero(); 4];
        probs[n.index()] = T::one();
        Self { probs }
    }

    pub fn probs(&self) -> &[T; 4] {
        &self.probs
    }

    /// Most probable category and its probability; the lower category wins ties.
    pub fn argmax(&self) -> (CountCategory, T) {
        let mut best = 0;
        for i in 1..4 {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        (CountCategory::ALL[best], self.probs[best])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig<T> {
    /// Weight on cells whose ground truth exceeds 0.5.
    pub alpha: T,
    /// Weight of the subitizing term.
    pub lambda: T,
}

impl<T: Scalar> Default for LossConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::of(5.0),
            lambda: T::of(0.25),
        }
    }
}

impl<T: Scalar> LossConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.lambda >= T::zero()) {
            return Err(invalid(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

fn check_pair<T: Scalar>(x: &[T], g: &[T], alpha: T) -> Result<()> {
    if x.len() != g.len() {
        return Err(invalid(format!(
            "prediction has {} values, ground truth {}",
            x.len(),
            g.len()
        )));
    }
    if x.is_empty() {
        return Err(invalid("loss needs at least one value"));
    }
    if !(alpha > T::zero()) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

#[inline]
fn cell_weight<T: Scalar>(g: T, alpha: T) -> T {
    if g > T::half() {
        alpha
    } else {
        T::one()
    }
}

/// `1/(2d) * sum_i w_i (x_i - g_i)^2` with `w_i = alpha` where `g_i > 0.5`, else 1.
pub fn weighted_euclidean_loss<T: Scalar>(x: &[T], g: &[T], alpha: T) -> Result<T> {
    check_pair(x, g, alpha)?;
    let d = T::from_usize(x.len()).expect("length fits in scalar");
    let sum: T = x
        .iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            let r = xi - gi;
            cell_weight(gi, alpha) * r * r
        })
        .sum();
    Ok(sum / (d + d))
}

/// Gradient of [`weighted_euclidean_loss`] with respect to `x`.
pub fn weighted_euclidean_grad<T: Scalar>(x: &[T], g: &[T], alpha: T) -> Result<Vec<T>> {
    check_pair(x, g, alpha)?;
    let d = T::from_usize(x.len()).expect("length fits in scalar");
    Ok(x.iter()
        .zip(g)
        .map(|(&xi, &gi)| cell_weight(gi, alpha) * (xi - gi) / d)
        .collect())
}

/// `-ln(max(p_n, 1e-12))`.
pub fn multinomial_logistic_loss<T: Scalar>(y: &CountDistribution<T>, n: CountCategory) -> T {
    -y.probs[n.index()].max(T::of(LOG_FLOOR)).ln()
}

/// Index-based variant of [`multinomial_logistic_loss`] for callers holding raw category ids.
pub fn multinomial_logistic_loss_at<T: Scalar>(y: &CountDistribution<T>, n: usize) -> Result<T> {
    Ok(multinomial_logistic_loss(y, CountCategory::from_index(n)?))
}

/// Whether the saliency term contributes, given the number of annotated boxes.
pub fn saliency_mask(n: CountCategory, n_box: Option<usize>) -> bool {
    n_box.is_none_or(|nb| nb >= n.min_count())
}

/// `mask * l_sal(x, g) + lambda * l_sub(y, n)`; the mask drops the saliency term for images
/// with fewer box annotations than objects.
pub fn multitask_loss<T: Scalar>(
    x: &[T],
    g: &[T],
    y: &CountDistribution<T>,
    n: CountCategory,
    cfg: &LossConfig<T>,
    n_box: Option<usize>,
) -> Result<T> {
    cfg.validate()?;
    let sub = multinomial_logistic_loss(y, n);
    let sal = if saliency_mask(n, n_box) {
        weighted_euclidean_loss(x, g, cfg.alpha)?
    } else {
        check_pair(x, g, cfg.alpha)?;
        T::zero()
    };
    Ok(sal + cfg.lambda * sub)
}

/// Gradient of [`multitask_loss`] with respect to `x`.
pub fn multitask_grad<T: Scalar>(
    x: &[T],
    g: &[T],
    n: CountCategory,
    cfg: &LossConfig<T>,
    n_box: Option<usize>,
) -> Result<Vec<T>> {
    cfg.validate()?;
    let grad = weighted_euclidean_grad(x, g, cfg.alpha)?;
    if saliency_mask(n, n_box) {
        Ok(grad)
    } else {
        Ok(vec![T::zero(); grad.len()])
    }
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_difference<T: Scalar>(x: &[T], step: T, mut f: impl FnMut(&[T]) -> T) -> Vec<T> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (step + step)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||, tiny)` over whole gradient vectors.
pub fn relative_error<T: Scalar>(a: &[T], b: &[T]) -> T {
    let norm = |v: &mut dyn Iterator<Item = T>| v.map(|t| t * t).sum::<T>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(&p, &q)| p - q));
    let scale = norm(&mut a.iter().copied())
        .max(norm(&mut b.iter().copied()))
        .max(T::min_positive_value());
    diff / scale
}
