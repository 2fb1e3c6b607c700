//! Evaluation suite: CC, SIM, AUC-Judd, AUC-Borji, NSS, EMD, KL.
//! Degenerate inputs are flagged, never fatal.

pub mod emd;

use crate::loss::distribution::KlDirection;
use crate::loss::saliency::{cc_score, nss_score, NssMode};
use crate::map::{FixationSet, SaliencyMap};
use crate::rng::SplitMix64;
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricStatus {
    Ok,
    /// Input was degenerate (constant map, empty fixations, zero mass).
    Degenerate,
    /// EMD computed on a downsampled grid.
    Approximate,
}

impl MetricStatus {
    pub fn flag(&self) -> &'static str {
        match self {
            MetricStatus::Ok => "ok",
            MetricStatus::Degenerate => "degenerate",
            MetricStatus::Approximate => "approx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue<T> {
    pub value: T,
    pub status: MetricStatus,
}

impl<T: Real> MetricValue<T> {
    fn ok(value: T) -> Self {
        Self {
            value,
            status: MetricStatus::Ok,
        }
    }

    fn degenerate() -> Self {
        Self {
            value: T::nan(),
            status: MetricStatus::Degenerate,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status != MetricStatus::Degenerate
    }
}

/// The seven scores for one (prediction, ground truth, fixations) triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport<T> {
    pub cc: MetricValue<T>,
    pub sim: MetricValue<T>,
    pub auc_judd: MetricValue<T>,
    pub auc_borji: MetricValue<T>,
    pub nss: MetricValue<T>,
    pub emd: MetricValue<T>,
    pub kl: MetricValue<T>,
}

impl<T: Real> MetricReport<T> {
    pub const COLUMNS: [&'static str; 7] =
        ["cc", "sim", "auc_judd", "auc_borji", "nss", "emd", "kl"];

    pub fn values(&self) -> [MetricValue<T>; 7] {
        [
            self.cc,
            self.sim,
            self.auc_judd,
            self.auc_borji,
            self.nss,
            self.emd,
            self.kl,
        ]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MetricConfig {
    pub borji_splits: usize,
    pub borji_seed: u64,
    pub emd_exact_limit: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            borji_splits: 100,
            borji_seed: 1,
            emd_exact_limit: 1024,
        }
    }
}

pub fn metric_cc<T: Real>(gt: &SaliencyMap<T>, pred: &SaliencyMap<T>) -> MetricValue<T> {
    match cc_score(gt, pred) {
        Ok(r) => MetricValue::ok(r.value),
        Err(_) => MetricValue::degenerate(),
    }
}

/// Histogram intersection of the two sum-normalized maps.
pub fn metric_sim<T: Real>(gt: &SaliencyMap<T>, pred: &SaliencyMap<T>) -> MetricValue<T> {
    if gt.dims() != pred.dims() {
        return MetricValue::degenerate();
    }
    let sum_gt: T = gt.values().iter().copied().sum();
    let sum_pred: T = pred.values().iter().copied().sum();
    if sum_gt <= T::zero() || sum_pred <= T::zero() {
        return MetricValue::degenerate();
    }
    let mut sim = T::zero();
    for (s, p) in gt.values().iter().zip(pred.values()) {
        sim += (*s / sum_gt).min(*p / sum_pred);
    }
    MetricValue::ok(sim)
}

/// Mann-Whitney AUC from positive/negative score samples; tied pairs
/// get half credit, so a constant map scores exactly 0.5.
fn auc_half_credit<T: Real>(positives: &[T], negatives: &[T]) -> T {
    let mut sorted = negatives.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite saliency values"));
    let mut wins = 0u64;
    let mut ties = 0u64;
    for p in positives {
        let below = sorted.partition_point(|n| n < p);
        let below_or_eq = sorted.partition_point(|n| n <= p);
        wins += below as u64;
        ties += (below_or_eq - below) as u64;
    }
    let pairs = (positives.len() * negatives.len()) as f64;
    lit::<T>((wins as f64 + 0.5 * ties as f64) / pairs)
}

/// AUC with every non-fixated pixel as a negative.
pub fn metric_auc_judd<T: Real>(pred: &SaliencyMap<T>, fix: &FixationSet) -> MetricValue<T> {
    if fix.is_empty() || fix.frame() != pred.dims() || fix.len() == pred.len() {
        return MetricValue::degenerate();
    }
    let mut fixated = vec![false; pred.len()];
    for idx in fix.indices() {
        fixated[idx] = true;
    }
    let positives: Vec<T> = fix.indices().map(|i| pred.values()[i]).collect();
    let negatives: Vec<T> = pred
        .values()
        .iter()
        .zip(&fixated)
        .filter(|(_, f)| !**f)
        .map(|(v, _)| *v)
        .collect();
    MetricValue::ok(auc_half_credit(&positives, &negatives))
}

/// AUC averaged over seeded random negative sets of size |fix|.
pub fn metric_auc_borji<T: Real>(
    pred: &SaliencyMap<T>,
    fix: &FixationSet,
    splits: usize,
    seed: u64,
) -> MetricValue<T> {
    if fix.is_empty() || splits == 0 || fix.frame() != pred.dims() || fix.len() == pred.len() {
        return MetricValue::degenerate();
    }
    let mut fixated = vec![false; pred.len()];
    for idx in fix.indices() {
        fixated[idx] = true;
    }
    let positives: Vec<T> = fix.indices().map(|i| pred.values()[i]).collect();
    let non_fixated: Vec<usize> = (0..pred.len()).filter(|i| !fixated[*i]).collect();
    let sample_size = fix.len().min(non_fixated.len());

    let mut rng = SplitMix64::new(seed);
    let mut pool = non_fixated;
    let mut acc = T::zero();
    for _ in 0..splits {
        // partial Fisher-Yates draw without replacement
        for k in 0..sample_size {
            let pick = k + rng.next_below(pool.len() - k);
            pool.swap(k, pick);
        }
        let negatives: Vec<T> = pool[..sample_size]
            .iter()
            .map(|&i| pred.values()[i])
            .collect();
        acc += auc_half_credit(&positives, &negatives);
    }
    MetricValue::ok(acc / lit(splits as f64))
}

/// Per-fixation mean of z-scored prediction values.
pub fn metric_nss<T: Real>(pred: &SaliencyMap<T>, fix: &FixationSet) -> MetricValue<T> {
    match nss_score(pred, fix, NssMode::PerFixation) {
        Ok(r) => MetricValue::ok(r.value),
        Err(_) => MetricValue::degenerate(),
    }
}

pub fn metric_emd<T: Real>(
    gt: &SaliencyMap<T>,
    pred: &SaliencyMap<T>,
    exact_limit: usize,
) -> MetricValue<T> {
    match emd::emd(gt, pred, exact_limit) {
        Ok((d, approx)) => MetricValue {
            value: d,
            status: if approx {
                MetricStatus::Approximate
            } else {
                MetricStatus::Ok
            },
        },
        Err(_) => MetricValue::degenerate(),
    }
}

/// Benchmark-convention KL: ground-truth-first, both maps floored and
/// normalized. Independent of the loss-side direction switch.
pub fn metric_kl<T: Real>(gt: &SaliencyMap<T>, pred: &SaliencyMap<T>) -> MetricValue<T> {
    if gt.dims() != pred.dims() {
        return MetricValue::degenerate();
    }
    let s = gt.to_distribution();
    let p = pred.to_distribution();
    match crate::loss::distribution::kld(&s, &p, KlDirection::GroundTruthFirst) {
        Ok(r) => MetricValue::ok(r.value),
        Err(_) => MetricValue::degenerate(),
    }
}

pub fn evaluate_all<T: Real>(
    gt: &SaliencyMap<T>,
    pred: &SaliencyMap<T>,
    fix: &FixationSet,
    config: &MetricConfig,
) -> MetricReport<T> {
    MetricReport {
        cc: metric_cc(gt, pred),
        sim: metric_sim(gt, pred),
        auc_judd: metric_auc_judd(pred, fix),
        auc_borji: metric_auc_borji(pred, fix, config.borji_splits, config.borji_seed),
        nss: metric_nss(pred, fix),
        emd: metric_emd(gt, pred, config.emd_exact_limit),
        kl: metric_kl(gt, pred),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, v: &[f64]) -> SaliencyMap<f64> {
        SaliencyMap::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn sim_identical_is_one() {
        let m = map(2, 2, &[0.1, 0.4, 0.3, 0.2]);
        let r = metric_sim(&m, &m);
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sim_disjoint_supports_is_zero() {
        let a = map(2, 1, &[1.0, 0.0]);
        let b = map(2, 1, &[0.0, 1.0]);
        assert_eq!(metric_sim(&a, &b).value, 0.0);
    }

    #[test]
    fn sim_forced_arithmetic() {
        let a = map(2, 1, &[0.5, 0.5]);
        let b = map(2, 1, &[0.25, 0.75]);
        let r = metric_sim(&a, &b);
        assert!((r.value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn sim_all_zero_is_degenerate() {
        let z = SaliencyMap::<f64>::zeros(2, 2);
        let m = map(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(metric_sim(&z, &m).status, MetricStatus::Degenerate);
    }

    #[test]
    fn auc_judd_perfect_ranking() {
        let pred = map(2, 2, &[0.9, 0.1, 0.2, 0.8]);
        let fix = FixationSet::new(vec![(0, 0), (1, 1)], 2, 2).unwrap();
        let r = metric_auc_judd(&pred, &fix);
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn auc_judd_constant_is_half() {
        let pred = SaliencyMap::constant(4, 4, 0.3).unwrap();
        let fix = FixationSet::new(vec![(0, 0), (2, 3)], 4, 4).unwrap();
        let r = metric_auc_judd(&pred, &fix);
        assert_eq!(r.value, 0.5);
    }

    #[test]
    fn auc_borji_perfect_ranking_any_seed() {
        let mut v = vec![0.0; 16];
        v[5] = 1.0;
        v[10] = 0.9;
        let pred = map(4, 4, &v);
        let fix = FixationSet::new(vec![(1, 1), (2, 2)], 4, 4).unwrap();
        for seed in [1, 7, 42] {
            let r = metric_auc_borji(&pred, &fix, 20, seed);
            assert_eq!(r.value, 1.0);
        }
    }

    #[test]
    fn auc_borji_constant_is_half() {
        let pred = SaliencyMap::constant(4, 4, 0.3).unwrap();
        let fix = FixationSet::new(vec![(0, 0), (2, 3)], 4, 4).unwrap();
        let r = metric_auc_borji(&pred, &fix, 10, 1);
        assert_eq!(r.value, 0.5);
    }

    #[test]
    fn auc_borji_deterministic_given_seed() {
        let mut rng = crate::rng::SplitMix64::new(55);
        let v: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
        let pred = map(8, 8, &v);
        let fix = FixationSet::new(vec![(1, 2), (5, 5), (7, 0), (3, 6)], 8, 8).unwrap();
        let a = metric_auc_borji(&pred, &fix, 100, 7);
        let b = metric_auc_borji(&pred, &fix, 100, 7);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn kl_scalar_recomputation() {
        let s = map(2, 1, &[0.5, 0.5]);
        let p = map(2, 1, &[0.25, 0.75]);
        let expected = 0.5 * 2f64.ln() + 0.5 * (2f64 / 3.0).ln();
        assert!((metric_kl(&s, &p).value - expected).abs() < 1e-6);
    }

    #[test]
    fn kl_nonnegative_on_random_pairs() {
        let mut rng = crate::rng::SplitMix64::new(56);
        for _ in 0..50 {
            let a: Vec<f64> = (0..16).map(|_| rng.next_f64()).collect();
            let b: Vec<f64> = (0..16).map(|_| rng.next_f64()).collect();
            let v = metric_kl(&map(4, 4, &a), &map(4, 4, &b)).value;
            assert!(v >= -1e-12);
        }
    }

    #[test]
    fn cc_is_symmetric() {
        let mut rng = crate::rng::SplitMix64::new(57);
        let a: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
        let b: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
        let ma = map(8, 8, &a);
        let mb = map(8, 8, &b);
        assert!((metric_cc(&ma, &mb).value - metric_cc(&mb, &ma).value).abs() < 1e-12);
    }

    #[test]
    fn evaluate_all_perfect_prediction() {
        let mut v = vec![0.0; 16];
        v[5] = 1.0;
        v[6] = 0.8;
        v[9] = 0.6;
        let gt = map(4, 4, &v);
        let fix = FixationSet::new(vec![(1, 1), (2, 1)], 4, 4).unwrap();
        let r = evaluate_all(&gt, &gt, &fix, &MetricConfig::default());
        assert!((r.cc.value - 1.0).abs() < 1e-12);
        assert!((r.sim.value - 1.0).abs() < 1e-12);
        assert!(r.kl.value.abs() < 1e-6);
        assert!(r.emd.value.abs() < 1e-9);
    }

    #[test]
    fn evaluate_all_uniform_prediction_flags() {
        let mut rng = crate::rng::SplitMix64::new(58);
        let gt_vals: Vec<f64> = (0..16).map(|_| rng.next_f64()).collect();
        let gt = map(4, 4, &gt_vals);
        let pred = SaliencyMap::constant(4, 4, 0.5).unwrap();
        let fix = FixationSet::new(vec![(0, 0), (3, 3)], 4, 4).unwrap();
        let r = evaluate_all(&gt, &pred, &fix, &MetricConfig::default());
        assert_eq!(r.auc_judd.value, 0.5);
        assert_eq!(r.nss.status, MetricStatus::Degenerate);
        assert_eq!(r.cc.status, MetricStatus::Degenerate);
    }
}
