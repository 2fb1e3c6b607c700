//! Saliency-inspired score terms: NSS and Pearson CC. Both return RAW
//! scores (higher is better); the combination layer owns the sign.

use crate::error::{Error, Result};
use crate::loss::LossResult;
use crate::map::{covariance, FixationSet, SaliencyMap};
use crate::scalar::{eps_std, lit, Real};

/// NSS normalization: divide the z-score sum by N×M (as the loss is
/// printed) or by the fixation count (the metric convention).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NssMode {
    PaperSumOverNm,
    #[default]
    PerFixation,
}

pub fn nss_score<T: Real>(
    pred: &SaliencyMap<T>,
    fix: &FixationSet,
    mode: NssMode,
) -> Result<LossResult<T>> {
    if fix.is_empty() {
        return Err(Error::EmptyFixations);
    }
    if fix.frame() != pred.dims() {
        return Err(Error::DimensionMismatch {
            expected: pred.dims(),
            got: fix.frame(),
        });
    }
    let st = pred.stats();
    if st.std <= eps_std() {
        return Err(Error::DegeneratePrediction(
            "constant map has no z-scores".into(),
        ));
    }
    let n = lit::<T>(pred.len() as f64);
    let denom = match mode {
        NssMode::PaperSumOverNm => n,
        NssMode::PerFixation => lit(fix.len() as f64),
    };

    let mut fixated = vec![false; pred.len()];
    let mut z_sum = T::zero();
    for idx in fix.indices() {
        fixated[idx] = true;
        z_sum += (pred.values()[idx] - st.mean) / st.std;
    }
    let value = z_sum / denom;

    // d z_i / d p_j = (δ_ij - 1/n)/σ - z_i (p_j - μ)/(n σ²)
    let fix_count = lit::<T>(fix.len() as f64);
    let gradient = pred
        .values()
        .iter()
        .zip(&fixated)
        .map(|(p, is_fix)| {
            let direct = if *is_fix { T::one() / st.std } else { T::zero() };
            let mean_term = fix_count / (n * st.std);
            let std_term = z_sum * (*p - st.mean) / (n * st.std * st.std);
            (direct - mean_term - std_term) / denom
        })
        .collect();

    Ok(LossResult::new(value, gradient))
}

pub fn cc_score<T: Real>(gt: &SaliencyMap<T>, pred: &SaliencyMap<T>) -> Result<LossResult<T>> {
    gt.same_dims(pred)?;
    let ss = gt.stats();
    let sp = pred.stats();
    if ss.std <= eps_std() || sp.std <= eps_std() {
        return Err(Error::DegeneratePrediction(
            "correlation undefined on constant map".into(),
        ));
    }
    let cov = covariance(gt, pred)?;
    let value = cov / (ss.std * sp.std);

    let n = lit::<T>(gt.len() as f64);
    let gradient = gt
        .values()
        .iter()
        .zip(pred.values())
        .map(|(s, p)| {
            let d_cov = (*s - ss.mean) / n;
            let d_std = (*p - sp.mean) / (n * sp.std);
            d_cov / (ss.std * sp.std) - value * d_std / sp.std
        })
        .collect();

    Ok(LossResult::new(value, gradient))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(v: &[f64]) -> SaliencyMap<f64> {
        SaliencyMap::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn nss_single_fixation_modes() {
        let pred = map(&[0.0, 1.0, 0.0, 1.0]);
        let fix = FixationSet::new(vec![(1, 0)], 4, 1).unwrap();
        let per = nss_score(&pred, &fix, NssMode::PerFixation).unwrap().value;
        let paper = nss_score(&pred, &fix, NssMode::PaperSumOverNm)
            .unwrap()
            .value;
        assert!((per - 1.0).abs() < 1e-12);
        assert!((paper - 0.25).abs() < 1e-12);
    }

    #[test]
    fn nss_all_pixels_fixated_is_zero() {
        let pred = map(&[0.1, 0.9, 0.4]);
        let fix = FixationSet::new(vec![(0, 0), (1, 0), (2, 0)], 3, 1).unwrap();
        let v = nss_score(&pred, &fix, NssMode::PerFixation).unwrap().value;
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn nss_constant_map_errors() {
        let pred = map(&[0.5, 0.5]);
        let fix = FixationSet::new(vec![(0, 0)], 2, 1).unwrap();
        assert!(nss_score(&pred, &fix, NssMode::PerFixation).is_err());
    }

    #[test]
    fn nss_empty_fixations_errors() {
        let pred = map(&[0.1, 0.9]);
        let fix = FixationSet::new(vec![], 2, 1).unwrap();
        assert!(nss_score(&pred, &fix, NssMode::PerFixation).is_err());
    }

    #[test]
    fn nss_affine_invariance_per_fixation() {
        let mut rng = crate::rng::SplitMix64::new(21);
        let vals: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
        let pred = SaliencyMap::new(8, 8, vals.clone()).unwrap();
        let scaled =
            SaliencyMap::new(8, 8, vals.iter().map(|v| 3.5 * v + 0.2).collect()).unwrap();
        let fix = FixationSet::new(vec![(1, 2), (5, 5), (7, 0)], 8, 8).unwrap();
        let a = nss_score(&pred, &fix, NssMode::PerFixation).unwrap().value;
        let b = nss_score(&scaled, &fix, NssMode::PerFixation).unwrap().value;
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn cc_perfect_linear_correlation() {
        let gt = map(&[0.1, 0.5, 0.9, 0.3]);
        let pred = SaliencyMap::new(4, 1, gt.values().iter().map(|v| 2.0 * v + 0.1).collect())
            .unwrap();
        let v = cc_score(&gt, &pred).unwrap().value;
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cc_anticorrelation() {
        let gt = map(&[0.1, 0.5, 0.9]);
        let pred = SaliencyMap::new(3, 1, gt.values().iter().map(|v| 1.0 - v).collect()).unwrap();
        let v = cc_score(&gt, &pred).unwrap().value;
        assert!((v + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cc_constant_input_errors() {
        assert!(cc_score(&map(&[0.5, 0.5]), &map(&[0.1, 0.9])).is_err());
        assert!(cc_score(&map(&[0.1, 0.9]), &map(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn cc_affine_invariance_and_bounds() {
        let mut rng = crate::rng::SplitMix64::new(31);
        for _ in 0..20 {
            let a: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
            let b: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
            let gt = SaliencyMap::new(8, 8, a).unwrap();
            let pred = SaliencyMap::new(8, 8, b.clone()).unwrap();
            let v = cc_score(&gt, &pred).unwrap().value;
            assert!((-1.0..=1.0).contains(&v));
            let rescaled =
                SaliencyMap::new(8, 8, b.iter().map(|v| 0.7 * v + 2.0).collect()).unwrap();
            let v2 = cc_score(&gt, &rescaled).unwrap().value;
            assert!((v - v2).abs() < 1e-10);
        }
    }

    #[test]
    fn cc_gradient_orthogonal_to_constants() {
        let mut rng = crate::rng::SplitMix64::new(41);
        let a: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
        let b: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
        let gt = SaliencyMap::new(8, 8, a).unwrap();
        let pred = SaliencyMap::new(8, 8, b).unwrap();
        let g = cc_score(&gt, &pred).unwrap().gradient;
        let dot: f64 = g.iter().sum();
        assert!(dot.abs() <= 1e-8);
    }
}
