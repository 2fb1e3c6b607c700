//! Pixel-wise losses: MSE, exponential absolute difference, absolute
//! error, and the two weighted-MSE variants (MLNET and parametric
//! sigmoid). Inputs are assumed unit-range; weights depend only on the
//! ground truth, so they are constants under ∂/∂Ŝ.

use crate::error::{Error, Result};
use crate::loss::LossResult;
use crate::map::SaliencyMap;
use crate::scalar::{lit, Real};

/// Parametric sigmoid weighting for SIG-MSE: w = k / (1 + exp(-k (s - λ))).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigWeightParams<T> {
    pub k: T,
    pub lambda: T,
}

impl<T: Real> SigWeightParams<T> {
    pub fn new(k: T, lambda: T) -> Result<Self> {
        if k <= T::zero() {
            return Err(Error::BadParameter("sigmoid steepness k must be > 0".into()));
        }
        if lambda < T::zero() || lambda > T::one() {
            return Err(Error::BadParameter("lambda must be in [0, 1]".into()));
        }
        Ok(Self { k, lambda })
    }

    /// Default steepness k = 10 with the given inflection.
    pub fn with_lambda(lambda: T) -> Result<Self> {
        Self::new(lit(10.0), lambda)
    }

    pub fn weight(&self, s: T) -> T {
        self.k / (T::one() + (-self.k * (s - self.lambda)).exp())
    }
}

pub fn mse<T: Real>(gt: &SaliencyMap<T>, pred: &SaliencyMap<T>) -> Result<LossResult<T>> {
    gt.same_dims(pred)?;
    let n = lit::<T>(gt.len() as f64);
    let mut value = T::zero();
    let mut gradient = Vec::with_capacity(gt.len());
    for (s, p) in gt.values().iter().zip(pred.values()) {
        let d = *s - *p;
        value += d * d;
        gradient.push(lit::<T>(2.0) * (*p - *s) / n);
    }
    Ok(LossResult::new(value / n, gradient))
}

pub fn ead<T: Real>(gt: &SaliencyMap<T>, pred: &SaliencyMap<T>) -> Result<LossResult<T>> {
    gt.same_dims(pred)?;
    let n = lit::<T>(gt.len() as f64);
    let mut value = T::zero();
    let mut gradient = Vec::with_capacity(gt.len());
    for (s, p) in gt.values().iter().zip(pred.values()) {
        let d = *p - *s;
        let e = d.abs().exp();
        value += e - T::one();
        gradient.push(sign(d) * e / n);
    }
    Ok(LossResult::new(value / n, gradient))
}

pub fn ae<T: Real>(gt: &SaliencyMap<T>, pred: &SaliencyMap<T>) -> Result<LossResult<T>> {
    gt.same_dims(pred)?;
    let n = lit::<T>(gt.len() as f64);
    let mut value = T::zero();
    let mut gradient = Vec::with_capacity(gt.len());
    for (s, p) in gt.values().iter().zip(pred.values()) {
        let d = *p - *s;
        value += d.abs();
        gradient.push(sign(d) / n);
    }
    Ok(LossResult::new(value / n, gradient))
}

/// MLNET weighting: w = 1 / (α - s), α = 1.1, computed as 10/(11 - 10 s)
/// so the endpoints land exactly on 10 (s = 1) and 1/1.1 (s = 0).
pub fn mlnet_weight<T: Real>(s: T) -> T {
    lit::<T>(10.0) / (lit::<T>(11.0) - lit::<T>(10.0) * s)
}

pub fn wmse_mlnet<T: Real>(gt: &SaliencyMap<T>, pred: &SaliencyMap<T>) -> Result<LossResult<T>> {
    weighted_mse(gt, pred, mlnet_weight)
}

pub fn wmse_sig<T: Real>(
    gt: &SaliencyMap<T>,
    pred: &SaliencyMap<T>,
    params: SigWeightParams<T>,
) -> Result<LossResult<T>> {
    weighted_mse(gt, pred, |s| params.weight(s))
}

fn weighted_mse<T: Real>(
    gt: &SaliencyMap<T>,
    pred: &SaliencyMap<T>,
    weight: impl Fn(T) -> T,
) -> Result<LossResult<T>> {
    gt.same_dims(pred)?;
    let n = lit::<T>(gt.len() as f64);
    let mut value = T::zero();
    let mut gradient = Vec::with_capacity(gt.len());
    for (s, p) in gt.values().iter().zip(pred.values()) {
        let w = weight(*s);
        let d = *s - *p;
        value += w * d * d;
        gradient.push(lit::<T>(2.0) * w * (*p - *s) / n);
    }
    Ok(LossResult::new(value / n, gradient))
}

/// Subgradient convention: sign(0) = 0.
#[inline]
fn sign<T: Real>(d: T) -> T {
    if d > T::zero() {
        T::one()
    } else if d < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}
