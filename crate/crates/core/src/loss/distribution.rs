//! Distribution-based losses: KL divergence, Bhattacharyya, the binary
//! cross-entropy family, and fixation negative log-likelihood.

use crate::error::{Error, Result};
use crate::loss::LossResult;
use crate::map::{FixationSet, ProbabilityMap, SaliencyMap};
use crate::scalar::{eps_clamp, lit, Real};

/// Which argument sits in front of the log ratio.
///
/// `AsWritten` keeps the prediction-first direction Σ Ŝ log(Ŝ/S);
/// `GroundTruthFirst` is the direction the saliency benchmarks use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KlDirection {
    #[default]
    AsWritten,
    GroundTruthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WbceParams<T> {
    pub w: T,
}

impl<T: Real> WbceParams<T> {
    pub fn new(w: T) -> Result<Self> {
        if w <= T::zero() || w >= T::one() {
            return Err(Error::BadParameter("wbce weight must be in (0, 1)".into()));
        }
        Ok(Self { w })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams<T> {
    pub gamma: T,
}

impl<T: Real> FocalParams<T> {
    pub fn new(gamma: T) -> Result<Self> {
        if gamma < T::zero() {
            return Err(Error::BadParameter("focal gamma must be >= 0".into()));
        }
        Ok(Self { gamma })
    }
}

impl<T: Real> Default for FocalParams<T> {
    fn default() -> Self {
        Self { gamma: lit(2.0) }
    }
}

pub fn kld<T: Real>(
    gt: &ProbabilityMap<T>,
    pred: &ProbabilityMap<T>,
    direction: KlDirection,
) -> Result<LossResult<T>> {
    gt.as_map().same_dims(pred.as_map())?;
    let mut value = T::zero();
    let mut gradient = Vec::with_capacity(gt.len());
    for (s, p) in gt.values().iter().zip(pred.values()) {
        match direction {
            KlDirection::AsWritten => {
                let r = (*p / *s).ln();
                value += *p * r;
                gradient.push(r + T::one());
            }
            KlDirection::GroundTruthFirst => {
                value += *s * (*s / *p).ln();
                gradient.push(-*s / *p);
            }
        }
    }
    Ok(LossResult::new(value, gradient))
}

/// Negated Bhattacharyya coefficient, so that lower is better.
pub fn bhat<T: Real>(gt: &ProbabilityMap<T>, pred: &ProbabilityMap<T>) -> Result<LossResult<T>> {
    gt.as_map().same_dims(pred.as_map())?;
    let half = lit::<T>(0.5);
    let mut value = T::zero();
    let mut gradient = Vec::with_capacity(gt.len());
    for (s, p) in gt.values().iter().zip(pred.values()) {
        value -= (*s * *p).sqrt();
        gradient.push(-half * (*s / *p).sqrt());
    }
    Ok(LossResult::new(value, gradient))
}

pub fn bce<T: Real>(gt: &SaliencyMap<T>, pred: &SaliencyMap<T>) -> Result<LossResult<T>> {
    cross_entropy(gt, pred, |s, p| {
        let value = -(s * p.ln() + (T::one() - s) * (T::one() - p).ln());
        let grad = (p - s) / (p * (T::one() - p));
        (value, grad)
    })
}

pub fn wbce<T: Real>(
    gt: &SaliencyMap<T>,
    pred: &SaliencyMap<T>,
    params: WbceParams<T>,
) -> Result<LossResult<T>> {
    let w = params.w;
    cross_entropy(gt, pred, |s, p| {
        let value = -(w * s * p.ln() + (T::one() - w) * (T::one() - s) * (T::one() - p).ln());
        let grad = -(w * s / p - (T::one() - w) * (T::one() - s) / (T::one() - p));
        (value, grad)
    })
}

/// Focal loss exactly as printed: Ŝ^γ modulation. Note the γ = 0 limit is
/// -Σ (1-S) log(1-Ŝ), not plain BCE: the positive-term weight (1 - Ŝ^0)
/// collapses to zero.
pub fn focal<T: Real>(
    gt: &SaliencyMap<T>,
    pred: &SaliencyMap<T>,
    params: FocalParams<T>,
) -> Result<LossResult<T>> {
    let g = params.gamma;
    cross_entropy(gt, pred, |s, p| {
        let pg = p.powf(g);
        let dpg = if g == T::zero() {
            T::zero()
        } else {
            g * p.powf(g - T::one())
        };
        let one = T::one();
        let value = -((one - pg) * s * p.ln() + pg * (one - s) * (one - p).ln());
        let grad = -(s * (-dpg * p.ln() + (one - pg) / p)
            + (one - s) * (dpg * (one - p).ln() - pg / (one - p)));
        (value, grad)
    })
}

fn cross_entropy<T: Real>(
    gt: &SaliencyMap<T>,
    pred: &SaliencyMap<T>,
    pixel: impl Fn(T, T) -> (T, T),
) -> Result<LossResult<T>> {
    gt.same_dims(pred)?;
    let clamp = eps_clamp::<T>();
    let hi = T::one() - clamp;
    let mut value = T::zero();
    let mut gradient = Vec::with_capacity(gt.len());
    for (s, p) in gt.values().iter().zip(pred.values()) {
        let p = p.max(clamp).min(hi);
        let (v, grad) = pixel(*s, p);
        value += v;
        gradient.push(grad);
    }
    Ok(LossResult::new(value, gradient))
}

/// Negative log-likelihood of the fixations under the prediction.
pub fn nll<T: Real>(pred: &ProbabilityMap<T>, fix: &FixationSet) -> Result<LossResult<T>> {
    if fix.is_empty() {
        return Err(Error::EmptyFixations);
    }
    let (w, h) = pred.dims();
    if fix.frame() != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            got: fix.frame(),
        });
    }
    let n_fix = lit::<T>(fix.len() as f64);
    let mut value = T::zero();
    let mut gradient = vec![T::zero(); pred.len()];
    for idx in fix.indices() {
        let p = pred.values()[idx];
        value -= p.ln();
        gradient[idx] = -T::one() / (n_fix * p);
    }
    Ok(LossResult::new(value / n_fix, gradient))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> ProbabilityMap<f64> {
        ProbabilityMap::from_map(SaliencyMap::new(v.len(), 1, v.to_vec()).unwrap()).unwrap()
    }

    fn map(v: &[f64]) -> SaliencyMap<f64> {
        SaliencyMap::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn kld_identical_is_zero() {
        let p = dist(&[0.25, 0.75]);
        for dir in [KlDirection::AsWritten, KlDirection::GroundTruthFirst] {
            assert!(kld(&p, &p, dir).unwrap().value.abs() < 1e-15);
        }
    }

    #[test]
    fn kld_scalar_recomputation() {
        // prediction-first: 0.5 ln(0.5/0.25) + 0.5 ln(0.5/0.75)
        let s = dist(&[0.25, 0.75]);
        let p = dist(&[0.5, 0.5]);
        let expected = 0.5 * 2f64.ln() + 0.5 * (2f64 / 3.0).ln();
        let got = kld(&s, &p, KlDirection::AsWritten).unwrap().value;
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn kld_nonnegative_on_random_pairs() {
        let mut rng = crate::rng::SplitMix64::new(5);
        for _ in 0..50 {
            let a: Vec<f64> = (0..16).map(|_| rng.next_f64() + 0.01).collect();
            let b: Vec<f64> = (0..16).map(|_| rng.next_f64() + 0.01).collect();
            let s = map(&a).to_distribution();
            let p = map(&b).to_distribution();
            for dir in [KlDirection::AsWritten, KlDirection::GroundTruthFirst] {
                assert!(kld(&s, &p, dir).unwrap().value >= -1e-12);
            }
        }
    }

    #[test]
    fn bhat_identical_is_minus_one() {
        let p = dist(&[0.1, 0.2, 0.7]);
        assert!((bhat(&p, &p).unwrap().value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn bhat_bounded_on_random_pairs() {
        let mut rng = crate::rng::SplitMix64::new(9);
        for _ in 0..50 {
            let a: Vec<f64> = (0..16).map(|_| rng.next_f64()).collect();
            let b: Vec<f64> = (0..16).map(|_| rng.next_f64()).collect();
            let v = bhat(&map(&a).to_distribution(), &map(&b).to_distribution())
                .unwrap()
                .value;
            assert!((-1.0 - 1e-12..=0.0).contains(&v));
        }
    }

    #[test]
    fn bhat_disjoint_supports_near_zero() {
        let s = map(&[1.0, 0.0]).to_distribution();
        let p = map(&[0.0, 1.0]).to_distribution();
        let v = bhat(&s, &p).unwrap().value;
        assert!(v < 0.0 && v > -1e-3);
    }

    #[test]
    fn bce_fair_coin_entropy() {
        let m = map(&[0.5]);
        let v = bce(&m, &m).unwrap().value;
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bce_binary_identity_under_clamping() {
        let m = map(&[1.0, 0.0, 1.0, 0.0]);
        let v = bce(&m, &m).unwrap().value;
        // clamped limit: -N log(1 - eps_clamp) per matching pixel
        assert!(v.abs() < 1e-5);
    }

    #[test]
    fn wbce_half_weight_halves_bce() {
        let s = map(&[0.2, 0.9, 0.5, 0.1]);
        let p = map(&[0.3, 0.6, 0.5, 0.2]);
        let full = bce(&s, &p).unwrap().value;
        let half = wbce(&s, &p, WbceParams::new(0.5).unwrap()).unwrap().value;
        assert!((half - 0.5 * full).abs() < 1e-12);
    }

    #[test]
    fn wbce_preset_sweep_accepted() {
        for w in [0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
            assert!(WbceParams::new(w).is_ok());
        }
        assert!(WbceParams::new(0.0).is_err());
        assert!(WbceParams::new(1.0).is_err());
    }

    #[test]
    fn focal_single_pixel_contribution() {
        // S=1, Ŝ=0.5, γ=2 → -(1 - 0.25) ln 0.5
        let v = focal(&map(&[1.0]), &map(&[0.5]), FocalParams::new(2.0).unwrap())
            .unwrap()
            .value;
        let expected = -(1.0 - 0.25) * 0.5f64.ln();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn focal_gamma_zero_as_written() {
        // as printed, γ=0 keeps only the negative term
        let s = map(&[0.3, 0.8]);
        let p = map(&[0.4, 0.6]);
        let v = focal(&s, &p, FocalParams::new(0.0).unwrap()).unwrap().value;
        let expected: f64 = s
            .values()
            .iter()
            .zip(p.values())
            .map(|(s, p)| -(1.0 - s) * (1.0 - p).ln())
            .sum();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn nll_uniform_is_log_n() {
        let m = SaliencyMap::<f64>::zeros(4, 4).to_distribution();
        let fix = FixationSet::new(vec![(0, 0), (3, 3)], 4, 4).unwrap();
        let v = nll(&m, &fix).unwrap().value;
        assert!((v - 16f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn nll_half_probability() {
        let m = dist(&[0.5, 0.5]);
        let fix = FixationSet::new(vec![(0, 0), (1, 0)], 2, 1).unwrap();
        let v = nll(&m, &fix).unwrap().value;
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nll_empty_fixations_errors() {
        let m = dist(&[0.5, 0.5]);
        let fix = FixationSet::new(vec![], 2, 1).unwrap();
        assert!(nll(&m, &fix).is_err());
    }
}
