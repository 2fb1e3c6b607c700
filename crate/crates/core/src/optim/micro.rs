//! Micro convolutional trainer: conv3x3(1→8) + ReLU + conv3x3(8→1) +
//! sigmoid, trained by full-batch gradient descent with backprop through
//! any loss combination. Small enough to finite-difference the
//! parameters, large enough to exercise the losses as training
//! objectives.

use crate::combo::{EvalResources, LossCombination};
use crate::error::{Error, Result};
use crate::map::{FixationSet, SaliencyMap};
use crate::nn::{
    conv3x3_backward_data, conv3x3_backward_params, conv3x3_forward, relu_backward, relu_forward,
    sigmoid_backward, sigmoid_forward, Tensor3,
};
use crate::rng::SplitMix64;
use crate::scalar::{lit, Real};

const HIDDEN: usize = 8;

#[derive(Debug, Clone)]
pub struct MicroNet<T> {
    conv1_w: Vec<T>, // HIDDEN×1×3×3
    conv1_b: Vec<T>,
    conv2_w: Vec<T>, // 1×HIDDEN×3×3
    conv2_b: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct TrainSample<T> {
    pub input: SaliencyMap<T>,
    pub gt: SaliencyMap<T>,
    pub fix: FixationSet,
}

impl<T: Real> MicroNet<T> {
    /// Xavier-uniform weights from the SplitMix64 stream, zero biases.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut draw = |fan_in: usize, fan_out: usize, count: usize| -> Vec<T> {
            let a = lit::<T>((6.0 / (fan_in + fan_out) as f64).sqrt());
            (0..count)
                .map(|_| (lit::<T>(2.0) * lit::<T>(rng.next_f64()) - T::one()) * a)
                .collect()
        };
        Self {
            conv1_w: draw(9, HIDDEN * 9, HIDDEN * 9),
            conv1_b: vec![T::zero(); HIDDEN],
            conv2_w: draw(HIDDEN * 9, 9, HIDDEN * 9),
            conv2_b: vec![T::zero(); 1],
        }
    }

    pub fn param_count(&self) -> usize {
        self.conv1_w.len() + self.conv1_b.len() + self.conv2_w.len() + self.conv2_b.len()
    }

    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.conv1_w);
        out.extend_from_slice(&self.conv1_b);
        out.extend_from_slice(&self.conv2_w);
        out.extend_from_slice(&self.conv2_b);
        out
    }

    pub fn set_params(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.param_count());
        let (w1, rest) = flat.split_at(self.conv1_w.len());
        let (b1, rest) = rest.split_at(self.conv1_b.len());
        let (w2, b2) = rest.split_at(self.conv2_w.len());
        self.conv1_w.copy_from_slice(w1);
        self.conv1_b.copy_from_slice(b1);
        self.conv2_w.copy_from_slice(w2);
        self.conv2_b.copy_from_slice(b2);
    }

    fn forward_cached(&self, input: &SaliencyMap<T>) -> ForwardCache<T> {
        let x = Tensor3::from_data(1, input.height(), input.width(), input.values().to_vec());
        let z1 = conv3x3_forward(&x, &self.conv1_w, &self.conv1_b, HIDDEN);
        let a1 = relu_forward(&z1);
        let z2 = conv3x3_forward(&a1, &self.conv2_w, &self.conv2_b, 1);
        let out = sigmoid_forward(&z2);
        ForwardCache { x, z1, a1, out }
    }

    /// Signs of the hidden pre-activations; finite-difference checks use
    /// this to detect parameter perturbations that cross a ReLU kink.
    pub fn hidden_relu_signature(&self, input: &SaliencyMap<T>) -> Vec<bool> {
        let cache = self.forward_cached(input);
        cache.z1.data.iter().map(|z| *z > T::zero()).collect()
    }

    /// Prediction with values in (0, 1), same dimensions as the input.
    pub fn forward(&self, input: &SaliencyMap<T>) -> SaliencyMap<T> {
        let cache = self.forward_cached(input);
        SaliencyMap::from_raw(input.width(), input.height(), cache.out.data)
    }

    /// Loss and flat parameter gradient on one sample.
    pub fn loss_and_param_grad(
        &self,
        sample: &TrainSample<T>,
        spec: &LossCombination<T>,
        resources: &EvalResources<'_, T>,
    ) -> Result<(T, Vec<T>)> {
        let cache = self.forward_cached(&sample.input);
        let pred = SaliencyMap::from_raw(
            sample.input.width(),
            sample.input.height(),
            cache.out.data.clone(),
        );
        let loss = spec.evaluate(&sample.gt, &pred, Some(&sample.fix), resources)?;

        let g_out = Tensor3::from_data(
            1,
            sample.input.height(),
            sample.input.width(),
            loss.gradient,
        );
        let g_z2 = sigmoid_backward(&g_out, &cache.out);
        let (gw2, gb2) = conv3x3_backward_params(&g_z2, &cache.a1);
        let g_a1 = conv3x3_backward_data(&g_z2, &self.conv2_w, HIDDEN);
        let g_z1 = relu_backward(&g_a1, &cache.z1);
        let (gw1, gb1) = conv3x3_backward_params(&g_z1, &cache.x);

        let mut flat = Vec::with_capacity(self.param_count());
        flat.extend(gw1);
        flat.extend(gb1);
        flat.extend(gw2);
        flat.extend(gb2);
        Ok((loss.value, flat))
    }
}

struct ForwardCache<T> {
    x: Tensor3<T>,
    z1: Tensor3<T>,
    a1: Tensor3<T>,
    out: Tensor3<T>,
}

/// Full-batch gradient descent; returns the trained net and the
/// per-epoch mean loss curve.
pub fn train_micro<T: Real>(
    mut net: MicroNet<T>,
    dataset: &[TrainSample<T>],
    spec: &LossCombination<T>,
    epochs: usize,
    step: T,
    resources: &EvalResources<'_, T>,
) -> Result<(MicroNet<T>, Vec<T>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("training dataset"));
    }
    let dims = dataset[0].input.dims();
    for s in dataset {
        if s.input.dims() != dims || s.gt.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: s.input.dims(),
            });
        }
    }

    let mut curve = Vec::with_capacity(epochs);
    let n = lit::<T>(dataset.len() as f64);
    for epoch in 0..epochs {
        let mut grad_acc = vec![T::zero(); net.param_count()];
        let mut loss_acc = T::zero();
        for sample in dataset {
            let (loss, grad) = net.loss_and_param_grad(sample, spec, resources)?;
            loss_acc += loss;
            for (a, g) in grad_acc.iter_mut().zip(grad) {
                *a += g;
            }
        }
        let mean_loss = loss_acc / n;
        if !mean_loss.is_finite() {
            return Err(Error::Diverged {
                iteration: epoch,
                trace: curve.iter().map(|v: &T| v.to_f64().unwrap_or(f64::NAN)).collect(),
            });
        }
        curve.push(mean_loss);

        let mut params = net.params();
        for (p, g) in params.iter_mut().zip(&grad_acc) {
            *p = *p - step * *g / n;
        }
        net.set_params(&params);
    }
    Ok((net, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combo::preset;

    fn random_map(w: usize, h: usize, seed: u64) -> SaliencyMap<f64> {
        let mut rng = SplitMix64::new(seed);
        SaliencyMap::new(w, h, (0..w * h).map(|_| rng.next_f64()).collect()).unwrap()
    }

    #[test]
    fn zero_epochs_leaves_net_unchanged() {
        let net = MicroNet::<f64>::seeded(1);
        let before = net.params();
        let sample = TrainSample {
            input: random_map(8, 8, 2),
            gt: random_map(8, 8, 3),
            fix: FixationSet::new(vec![(1, 1)], 8, 8).unwrap(),
        };
        let spec = preset::<f64>("MSE").unwrap();
        let (after, curve) =
            train_micro(net, &[sample], &spec, 0, 0.1, &EvalResources::none()).unwrap();
        assert_eq!(after.params(), before);
        assert!(curve.is_empty());
    }

    #[test]
    fn empty_dataset_errors() {
        let net = MicroNet::<f64>::seeded(1);
        let spec = preset::<f64>("MSE").unwrap();
        assert!(train_micro(net, &[], &spec, 1, 0.1, &EvalResources::none()).is_err());
    }

    #[test]
    fn output_stays_in_unit_interval() {
        let net = MicroNet::<f64>::seeded(5);
        let out = net.forward(&random_map(8, 8, 6));
        assert!(out.values().iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn training_reduces_mse() {
        let input = random_map(8, 8, 7);
        let gt = input.normalize_unit();
        let sample = TrainSample {
            input,
            gt,
            fix: FixationSet::new(vec![(2, 2), (5, 6)], 8, 8).unwrap(),
        };
        let spec = preset::<f64>("MSE").unwrap();
        let (_, curve) = train_micro(
            MicroNet::seeded(8),
            &[sample],
            &spec,
            50,
            5.0,
            &EvalResources::none(),
        )
        .unwrap();
        assert!(curve.last().unwrap() < curve.first().unwrap());
    }
}
