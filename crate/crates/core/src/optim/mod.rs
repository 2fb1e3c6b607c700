//! Gradient verification and direct-map optimization: gradient descent
//! on the saliency map itself, exposing a loss function's optimum
//! without any network in between.

pub mod micro;

use crate::combo::{EvalResources, LossCombination, TermKind};
use crate::error::{Error, Result};
use crate::map::{FixationSet, SaliencyMap};
use crate::rng::SplitMix64;
use crate::scalar::{lit, Real};

/// Central-difference comparison of a combination's analytic gradient.
#[derive(Debug, Clone)]
pub struct GradCheckReport<T> {
    pub analytic: Vec<T>,
    pub numeric: Vec<T>,
    /// NaN where the pixel was skipped as kink-adjacent.
    pub rel_errors: Vec<T>,
    pub max_rel_err: T,
    pub skipped: usize,
}

/// rel err = |a - n| / max(|a|, |n|, 1e-8)
fn rel_err<T: Real>(a: T, n: T) -> T {
    (a - n).abs() / a.abs().max(n.abs()).max(lit(1e-8))
}

pub fn gradcheck<T: Real>(
    spec: &LossCombination<T>,
    gt: &SaliencyMap<T>,
    pred: &SaliencyMap<T>,
    fix: Option<&FixationSet>,
    resources: &EvalResources<'_, T>,
    h: T,
) -> Result<GradCheckReport<T>> {
    let base = spec.evaluate(gt, pred, fix, resources)?;
    let (w, hgt) = pred.dims();

    let has_abs_kinks = spec
        .terms
        .iter()
        .any(|t| matches!(t.kind, TermKind::Ae | TermKind::Ead));
    let perceptual = spec.needs_extractor();
    let kink_dist = lit::<T>(1e-4);

    let mut numeric = Vec::with_capacity(pred.len());
    let mut rel_errors = Vec::with_capacity(pred.len());
    let mut max_rel_err = T::zero();
    let mut skipped = 0usize;

    for i in 0..pred.len() {
        let mut plus = pred.values().to_vec();
        let mut minus = pred.values().to_vec();
        plus[i] += h;
        minus[i] -= h;
        let map_plus = SaliencyMap::from_raw(w, hgt, plus);
        let map_minus = SaliencyMap::from_raw(w, hgt, minus);

        let mut skip = false;
        if has_abs_kinks && (gt.values()[i] - pred.values()[i]).abs() < kink_dist {
            skip = true;
        }
        if !skip && perceptual {
            // a ReLU flipping sign between the two perturbed forwards
            // makes the central difference meaningless at this pixel
            let f = resources
                .extractor
                .ok_or_else(|| Error::MissingExtractor("gradcheck".into()))?;
            if f.relu_signature(&map_plus)? != f.relu_signature(&map_minus)? {
                skip = true;
            }
        }

        let fd = (spec.evaluate(gt, &map_plus, fix, resources)?.value
            - spec.evaluate(gt, &map_minus, fix, resources)?.value)
            / (lit::<T>(2.0) * h);
        numeric.push(fd);

        // central differences with step h cannot certify derivatives
        // below the truncation noise floor; treat them as unresolvable
        if base.gradient[i].abs().max(fd.abs()) < h {
            skip = true;
        }

        if skip {
            skipped += 1;
            rel_errors.push(T::nan());
        } else {
            let e = rel_err(base.gradient[i], fd);
            if e > max_rel_err {
                max_rel_err = e;
            }
            rel_errors.push(e);
        }
    }

    Ok(GradCheckReport {
        analytic: base.gradient,
        numeric,
        rel_errors,
        max_rel_err,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Projection {
    /// Clamp every pixel into [0, 1].
    #[default]
    ClampUnit,
    /// Clamp to non-negative, then rescale to unit mass.
    Distribution,
    None,
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizeConfig<T> {
    pub step: T,
    pub max_iters: usize,
    pub projection: Projection,
    /// Stop when the loss decreases by less than this between iterations.
    pub tol: T,
    pub seed: u64,
}

impl<T: Real> Default for OptimizeConfig<T> {
    fn default() -> Self {
        Self {
            step: T::one(),
            max_iters: 500,
            projection: Projection::ClampUnit,
            tol: lit(1e-12),
            seed: 1,
        }
    }
}

fn project<T: Real>(values: &mut [T], projection: Projection) {
    match projection {
        Projection::ClampUnit => {
            for v in values.iter_mut() {
                *v = v.max(T::zero()).min(T::one());
            }
        }
        Projection::Distribution => {
            for v in values.iter_mut() {
                *v = v.max(T::zero());
            }
            let sum: T = values.iter().copied().sum();
            if sum > T::zero() {
                for v in values.iter_mut() {
                    *v /= sum;
                }
            } else {
                let uniform = T::one() / lit(values.len() as f64);
                values.iter_mut().for_each(|v| *v = uniform);
            }
        }
        Projection::None => {}
    }
}

/// Projected gradient descent from seeded near-uniform noise, with a
/// backtracking line search (halve the step on any increase, up to 30
/// halvings). The returned trace is non-increasing.
pub fn optimize_map<T: Real>(
    spec: &LossCombination<T>,
    gt: &SaliencyMap<T>,
    fix: Option<&FixationSet>,
    cfg: &OptimizeConfig<T>,
    resources: &EvalResources<'_, T>,
) -> Result<(SaliencyMap<T>, Vec<T>)> {
    if cfg.step <= T::zero() || cfg.max_iters == 0 {
        return Err(Error::BadParameter("step must be > 0, iters >= 1".into()));
    }
    let (w, h) = gt.dims();
    let mut rng = SplitMix64::new(cfg.seed);
    // constant init is forbidden (NSS/CC undefined); 0.5 ± 0.01 noise
    let mut values: Vec<T> = (0..gt.len())
        .map(|_| lit::<T>(0.5) + lit::<T>(0.01) * (lit::<T>(2.0) * lit::<T>(rng.next_f64()) - T::one()))
        .collect();
    project(&mut values, cfg.projection);

    let mut current = SaliencyMap::from_raw(w, h, values);
    let mut result = spec.evaluate(gt, &current, fix, resources)?;
    let mut trace = vec![result.value];
    if !result.is_finite() {
        return Err(Error::Diverged {
            iteration: 0,
            trace: to_f64(&trace),
        });
    }

    for iter in 1..=cfg.max_iters {
        let mut step = cfg.step;
        let mut accepted = None;
        for _ in 0..=30 {
            let mut cand: Vec<T> = current
                .values()
                .iter()
                .zip(&result.gradient)
                .map(|(x, g)| *x - step * *g)
                .collect();
            project(&mut cand, cfg.projection);
            let cand_map = SaliencyMap::from_raw(w, h, cand);
            // candidates that error out (e.g. constant under NSS) are
            // treated like an increase: halve and retry
            match spec.evaluate(gt, &cand_map, fix, resources) {
                Ok(r) if r.value.is_finite() && r.value <= result.value => {
                    accepted = Some((cand_map, r));
                    break;
                }
                Ok(r) if !r.value.is_finite() => {
                    return Err(Error::Diverged {
                        iteration: iter,
                        trace: to_f64(&trace),
                    });
                }
                _ => step = step / lit(2.0),
            }
        }
        let Some((cand_map, r)) = accepted else { break };
        let prev = result.value;
        current = cand_map;
        result = r;
        trace.push(result.value);
        if (prev - result.value).abs() < cfg.tol {
            break;
        }
    }
    Ok((current, trace))
}

fn to_f64<T: Real>(trace: &[T]) -> Vec<f64> {
    trace.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
}
