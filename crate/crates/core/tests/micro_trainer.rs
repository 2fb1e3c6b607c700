//! End-to-end micro trainer checks: learn clean Gaussian blobs from
//! noisy inputs, and verify the backpropagated parameter gradient by
//! finite differences.

use saliency_core::combo::{preset, EvalResources};
use saliency_core::map::{FixationSet, SaliencyMap};
use saliency_core::metrics::metric_cc;
use saliency_core::optim::micro::{train_micro, MicroNet, TrainSample};
use saliency_core::rng::SplitMix64;

const SIZE: usize = 12;

/// Gaussian blob peaked at (cx, cy), σ = 2.
fn blob(cx: f64, cy: f64) -> SaliencyMap<f64> {
    let mut v = Vec::with_capacity(SIZE * SIZE);
    for y in 0..SIZE {
        for x in 0..SIZE {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            v.push((-d2 / 8.0).exp());
        }
    }
    SaliencyMap::new(SIZE, SIZE, v).unwrap()
}

fn blob_sample(rng: &mut SplitMix64) -> TrainSample<f64> {
    let cx = 2.0 + 8.0 * rng.next_f64();
    let cy = 2.0 + 8.0 * rng.next_f64();
    let gt = blob(cx, cy);
    let noisy: Vec<f64> = gt
        .values()
        .iter()
        .map(|v| (v + 0.2 * (rng.next_f64() - 0.5)).clamp(0.0, 1.0))
        .collect();
    let input = SaliencyMap::new(SIZE, SIZE, noisy).unwrap();
    let fix = FixationSet::new(
        vec![(cx.round() as usize, cy.round() as usize)],
        SIZE,
        SIZE,
    )
    .unwrap();
    TrainSample { input, gt, fix }
}

#[test]
fn blob_dataset_reaches_held_out_cc() {
    let mut rng = SplitMix64::new(1);
    let train: Vec<_> = (0..8).map(|_| blob_sample(&mut rng)).collect();
    let held_out: Vec<_> = (0..4).map(|_| blob_sample(&mut rng)).collect();

    let spec = preset::<f64>("LC1").unwrap();
    let net = MicroNet::<f64>::seeded(1);
    let (trained, curve) =
        train_micro(net, &train, &spec, 200, 0.1, &EvalResources::none()).unwrap();
    assert_eq!(curve.len(), 200);

    let mean_cc: f64 = held_out
        .iter()
        .map(|s| metric_cc(&s.gt, &trained.forward(&s.input)).value)
        .sum::<f64>()
        / held_out.len() as f64;
    assert!(mean_cc >= 0.9, "held-out mean CC {mean_cc}");
}

#[test]
fn training_is_deterministic_under_fixed_seed() {
    let mut rng = SplitMix64::new(1);
    let train: Vec<_> = (0..2).map(|_| blob_sample(&mut rng)).collect();
    let spec = preset::<f64>("LC1").unwrap();
    let run = || {
        train_micro(
            MicroNet::<f64>::seeded(1),
            &train,
            &spec,
            20,
            0.1,
            &EvalResources::none(),
        )
        .unwrap()
    };
    let (a, curve_a) = run();
    let (b, curve_b) = run();
    assert_eq!(a.params(), b.params());
    assert_eq!(curve_a, curve_b);
}

#[test]
fn parameter_gradient_matches_finite_differences() {
    let mut rng = SplitMix64::new(9);
    let sample = blob_sample(&mut rng);
    let spec = preset::<f64>("MSE").unwrap();
    let net = MicroNet::<f64>::seeded(3);
    let resources = EvalResources::none();

    let (_, analytic) = net.loss_and_param_grad(&sample, &spec, &resources).unwrap();
    let base_params = net.params();
    let h = 1e-6;
    let mut max_rel = 0.0f64;
    for i in 0..base_params.len() {
        let probe_at = |delta: f64| {
            let mut p = base_params.clone();
            p[i] += delta;
            let mut probe = net.clone();
            probe.set_params(&p);
            probe
        };
        let (plus, minus) = (probe_at(h), probe_at(-h));
        // central differences are meaningless on parameters whose
        // perturbation crosses a ReLU kink
        if plus.hidden_relu_signature(&sample.input)
            != minus.hidden_relu_signature(&sample.input)
        {
            continue;
        }
        let eval =
            |p: &MicroNet<f64>| p.loss_and_param_grad(&sample, &spec, &resources).unwrap().0;
        let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    assert!(max_rel <= 1e-4, "max param-grad rel err {max_rel}");
}
