//! Direct-map optimization sanity: known minimizers are recovered, the
//! quadratic losses obey the one-step Newton identity, and different
//! objectives drive the map to measurably different optima.

use saliency_core::combo::{preset, EvalResources};
use saliency_core::loss::pixel::{self, mlnet_weight, SigWeightParams};
use saliency_core::map::{FixationSet, SaliencyMap};
use saliency_core::metrics::{metric_nss, metric_sim};
use saliency_core::optim::{optimize_map, OptimizeConfig, Projection};
use saliency_core::rng::SplitMix64;

fn random_map(w: usize, h: usize, seed: u64) -> SaliencyMap<f64> {
    let mut rng = SplitMix64::new(seed);
    SaliencyMap::new(w, h, (0..w * h).map(|_| rng.next_f64()).collect()).unwrap()
}

#[test]
fn mse_recovers_ground_truth_within_budget() {
    let gt = random_map(16, 16, 301);
    let spec = preset::<f64>("MSE").unwrap();
    let cfg = OptimizeConfig {
        step: 200.0,
        max_iters: 500,
        ..OptimizeConfig::default()
    };
    let (opt, trace) = optimize_map(&spec, &gt, None, &cfg, &EvalResources::none()).unwrap();
    assert!(trace.len() <= 501);
    let linf = opt
        .values()
        .iter()
        .zip(gt.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(linf <= 1e-3, "L-inf {linf}");
}

#[test]
fn kld_with_distribution_projection_matches_in_total_variation() {
    let gt = random_map(8, 8, 302);
    let spec = preset::<f64>("KLD").unwrap();
    let cfg = OptimizeConfig {
        step: 0.05,
        max_iters: 5000,
        projection: Projection::Distribution,
        tol: 0.0,
        seed: 1,
    };
    let (opt, _) = optimize_map(&spec, &gt, None, &cfg, &EvalResources::none()).unwrap();
    let target = gt.to_distribution();
    let opt_dist = opt.to_distribution();
    let tv: f64 = 0.5
        * opt_dist
            .values()
            .iter()
            .zip(target.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    assert!(tv <= 1e-3, "total variation {tv}");
}

/// One diagonal Newton step p - g·(NM / (2 w_i)) lands exactly on the
/// ground truth for every quadratic loss.
#[test]
fn quadratic_one_step_newton_identity() {
    let gt = random_map(8, 8, 303);
    let pred = random_map(8, 8, 304);
    let nm = gt.len() as f64;

    let check = |grad: &[f64], weight: &dyn Fn(usize) -> f64| {
        for (i, ((p, s), g)) in pred.values().iter().zip(gt.values()).zip(grad).enumerate() {
            let newton = p - g * nm / (2.0 * weight(i));
            assert!(
                (newton - s).abs() <= 1e-10,
                "pixel {i}: {newton} vs {s}"
            );
        }
    };

    let r = pixel::mse(&gt, &pred).unwrap();
    check(&r.gradient, &|_| 1.0);

    let r = pixel::wmse_mlnet(&gt, &pred).unwrap();
    check(&r.gradient, &|i| mlnet_weight(gt.values()[i]));

    let params = SigWeightParams::with_lambda(0.55).unwrap();
    let r = pixel::wmse_sig(&gt, &pred, params).unwrap();
    check(&r.gradient, &|i| params.weight(gt.values()[i]));
}

#[test]
fn nss_only_optimum_scores_high() {
    let gt = random_map(16, 16, 305);
    let fix = FixationSet::new(vec![(3, 4), (10, 12), (14, 2)], 16, 16).unwrap();
    let spec = preset::<f64>("NSS").unwrap();
    let cfg = OptimizeConfig {
        step: 5.0,
        max_iters: 500,
        ..OptimizeConfig::default()
    };
    let (opt, _) = optimize_map(&spec, &gt, Some(&fix), &cfg, &EvalResources::none()).unwrap();
    let nss = metric_nss(&opt, &fix).value;
    assert!(nss >= 2.0, "final NSS {nss}");
}

/// The thesis property at the loss-landscape level: the map that
/// maximizes NSS looks nothing like the MSE minimizer.
#[test]
fn nss_and_mse_optima_differ_in_sim() {
    let gt = random_map(16, 16, 306);
    let fix = FixationSet::new(vec![(3, 4), (10, 12), (14, 2)], 16, 16).unwrap();

    let run = |name: &str, step: f64| {
        let spec = preset::<f64>(name).unwrap();
        let cfg = OptimizeConfig {
            step,
            max_iters: 500,
            ..OptimizeConfig::default()
        };
        optimize_map(&spec, &gt, Some(&fix), &cfg, &EvalResources::none())
            .unwrap()
            .0
    };
    let mse_opt = run("MSE", 200.0);
    let nss_opt = run("NSS", 5.0);

    let sim_mse = metric_sim(&gt, &mse_opt).value;
    let sim_nss = metric_sim(&gt, &nss_opt).value;
    assert!(
        (sim_mse - sim_nss).abs() >= 0.05,
        "SIM gap too small: {sim_mse} vs {sim_nss}"
    );
}
