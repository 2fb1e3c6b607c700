//! Perceptual losses: deep-feature distance and Gram-matrix distance
//! over a pluggable feature extractor. The default extractor is a
//! seeded random conv pyramid (conv3x3 → ReLU → 2x2 average pool);
//! externally computed pyramids can be loaded for value-only use.

use crate::error::{Error, Result};
use crate::loss::LossResult;
use crate::map::SaliencyMap;
use crate::nn::{
    avgpool2_backward, avgpool2_forward, conv3x3_backward_data, conv3x3_forward, relu_backward,
    relu_forward, Tensor3,
};
use crate::rng::SplitMix64;
use crate::scalar::{lit, Real};

#[derive(Debug, Clone)]
pub struct ExtractorLayer<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    /// [out_ch][in_ch][ky][kx]
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub pool: bool,
}

/// Deterministic stack of conv/ReLU/avgpool layers.
#[derive(Debug, Clone)]
pub struct FeatureExtractor<T> {
    layers: Vec<ExtractorLayer<T>>,
}

pub const DEFAULT_CHANNEL_PLAN: [usize; 3] = [8, 16, 32];

impl<T: Real> FeatureExtractor<T> {
    /// Xavier-uniform weights drawn from the SplitMix64 stream in
    /// layer, out-channel, in-channel, row, column order; zero biases.
    pub fn seeded(seed: u64, channel_plan: &[usize]) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut layers = Vec::with_capacity(channel_plan.len());
        let mut in_ch = 1;
        for &out_ch in channel_plan {
            let fan_in = in_ch * 9;
            let fan_out = out_ch * 9;
            let a = lit::<T>((6.0 / (fan_in + fan_out) as f64).sqrt());
            let two = lit::<T>(2.0);
            let weights = (0..out_ch * in_ch * 9)
                .map(|_| (two * lit::<T>(rng.next_f64()) - T::one()) * a)
                .collect();
            layers.push(ExtractorLayer {
                in_ch,
                out_ch,
                weights,
                bias: vec![T::zero(); out_ch],
                pool: true,
            });
            in_ch = out_ch;
        }
        Self { layers }
    }

    pub fn default_seeded(seed: u64) -> Self {
        Self::seeded(seed, &DEFAULT_CHANNEL_PLAN)
    }

    /// Single 1→1 layer with a center-one kernel and no pooling; the
    /// extractor is then the identity on non-negative maps.
    pub fn identity() -> Self {
        let mut weights = vec![T::zero(); 9];
        weights[4] = T::one();
        Self {
            layers: vec![ExtractorLayer {
                in_ch: 1,
                out_ch: 1,
                weights,
                bias: vec![T::zero()],
                pool: false,
            }],
        }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[ExtractorLayer<T>] {
        &self.layers
    }

    fn check_size(&self, map: &SaliencyMap<T>) -> Result<()> {
        let pools = self.layers.iter().filter(|l| l.pool).count();
        let min = 1usize << pools;
        if map.width() < min || map.height() < min {
            return Err(Error::MapTooSmall {
                got: map.dims(),
                layers: self.layers.len(),
            });
        }
        Ok(())
    }

    fn forward_cached(&self, map: &SaliencyMap<T>) -> Result<Vec<LayerCache<T>>> {
        self.check_size(map)?;
        let mut x = Tensor3::from_data(1, map.height(), map.width(), map.values().to_vec());
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let pre_relu = conv3x3_forward(&x, &layer.weights, &layer.bias, layer.out_ch);
            let post_relu = relu_forward(&pre_relu);
            let output = if layer.pool {
                avgpool2_forward(&post_relu)
            } else {
                post_relu.clone()
            };
            x = output.clone();
            caches.push(LayerCache {
                pre_relu,
                post_relu,
                output,
            });
        }
        Ok(caches)
    }

    pub fn extract(&self, map: &SaliencyMap<T>) -> Result<FeaturePyramid<T>> {
        Ok(FeaturePyramid {
            layers: self
                .forward_cached(map)?
                .into_iter()
                .map(|c| c.output)
                .collect(),
        })
    }

    /// Signs of every pre-activation; used to mask ReLU kinks in
    /// finite-difference checks.
    pub fn relu_signature(&self, map: &SaliencyMap<T>) -> Result<Vec<bool>> {
        let caches = self.forward_cached(map)?;
        Ok(caches
            .iter()
            .flat_map(|c| c.pre_relu.data.iter().map(|z| *z > T::zero()))
            .collect())
    }

    /// Backpropagates per-layer output gradients down to the input map.
    fn backward(
        &self,
        caches: &[LayerCache<T>],
        mut grads: Vec<Option<Tensor3<T>>>,
    ) -> Vec<T> {
        let n = self.layers.len();
        debug_assert_eq!(grads.len(), n);
        let top = &caches[n - 1].output;
        let mut g = grads[n - 1]
            .take()
            .unwrap_or_else(|| Tensor3::zeros(top.channels, top.height, top.width));
        for k in (0..n).rev() {
            let layer = &self.layers[k];
            let cache = &caches[k];
            let g_post = if layer.pool {
                avgpool2_backward(&g, cache.post_relu.height, cache.post_relu.width)
            } else {
                g
            };
            let g_pre = relu_backward(&g_post, &cache.pre_relu);
            g = conv3x3_backward_data(&g_pre, &layer.weights, layer.in_ch);
            if k > 0 {
                if let Some(extra) = grads[k - 1].take() {
                    for (a, b) in g.data.iter_mut().zip(extra.data) {
                        *a += b;
                    }
                }
            }
        }
        g.data
    }
}

struct LayerCache<T> {
    pre_relu: Tensor3<T>,
    post_relu: Tensor3<T>,
    output: Tensor3<T>,
}

/// Per-layer activation stacks.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid<T> {
    pub layers: Vec<Tensor3<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix<T> {
    pub layer: usize,
    pub channels: usize,
    /// channels × channels, row-major
    pub matrix: Vec<T>,
}

/// G = ψψᵀ / (C·H·W) where ψ is the activation reshaped to C×(H·W).
pub fn gram<T: Real>(layer: usize, act: &Tensor3<T>) -> GramMatrix<T> {
    let c = act.channels;
    let spatial = act.height * act.width;
    let norm = lit::<T>((c * spatial) as f64);
    let mut matrix = vec![T::zero(); c * c];
    for a in 0..c {
        for b in a..c {
            let mut dot = T::zero();
            for s in 0..spatial {
                dot += act.data[a * spatial + s] * act.data[b * spatial + s];
            }
            let v = dot / norm;
            matrix[a * c + b] = v;
            matrix[b * c + a] = v;
        }
    }
    GramMatrix {
        layer,
        channels: c,
        matrix,
    }
}

/// Deep-feature loss: per-layer normalized squared feature distance.
pub fn df_loss<T: Real>(
    gt: &SaliencyMap<T>,
    pred: &SaliencyMap<T>,
    extractor: &FeatureExtractor<T>,
) -> Result<LossResult<T>> {
    gt.same_dims(pred)?;
    let pyr_gt = extractor.extract(gt)?;
    let caches = extractor.forward_cached(pred)?;
    let mut value = T::zero();
    let mut grads = Vec::with_capacity(caches.len());
    let two = lit::<T>(2.0);
    for (s_act, cache) in pyr_gt.layers.iter().zip(&caches) {
        let p_act = &cache.output;
        let norm = lit::<T>(p_act.len() as f64);
        let mut g = Tensor3::zeros(p_act.channels, p_act.height, p_act.width);
        for ((p, s), gv) in p_act.data.iter().zip(&s_act.data).zip(&mut g.data) {
            let d = *p - *s;
            value += d * d / norm;
            *gv = two * d / norm;
        }
        grads.push(Some(g));
    }
    let gradient = extractor.backward(&caches, grads);
    Ok(LossResult::new(value, gradient))
}

/// Gram-matrix loss: per-layer squared Frobenius distance of Grams.
pub fn gm_loss<T: Real>(
    gt: &SaliencyMap<T>,
    pred: &SaliencyMap<T>,
    extractor: &FeatureExtractor<T>,
) -> Result<LossResult<T>> {
    gt.same_dims(pred)?;
    let pyr_gt = extractor.extract(gt)?;
    let caches = extractor.forward_cached(pred)?;
    let mut value = T::zero();
    let mut grads = Vec::with_capacity(caches.len());
    let four = lit::<T>(4.0);
    for (j, (s_act, cache)) in pyr_gt.layers.iter().zip(&caches).enumerate() {
        let p_act = &cache.output;
        let g_s = gram(j, s_act);
        let g_p = gram(j, p_act);
        let c = p_act.channels;
        let spatial = p_act.height * p_act.width;
        let norm = lit::<T>((c * spatial) as f64);
        let diff: Vec<T> = g_p
            .matrix
            .iter()
            .zip(&g_s.matrix)
            .map(|(p, s)| *p - *s)
            .collect();
        value += diff.iter().map(|d| *d * *d).sum();
        // dL/dψ = 4 D ψ / (C·H·W), D symmetric
        let mut g = Tensor3::zeros(c, p_act.height, p_act.width);
        for a in 0..c {
            for s in 0..spatial {
                let mut acc = T::zero();
                for b in 0..c {
                    acc += diff[a * c + b] * p_act.data[b * spatial + s];
                }
                g.data[a * spatial + s] = four * acc / norm;
            }
        }
        grads.push(Some(g));
    }
    let gradient = extractor.backward(&caches, grads);
    Ok(LossResult::new(value, gradient))
}

fn check_pyramid_shapes<T: Real>(a: &FeaturePyramid<T>, b: &FeaturePyramid<T>) -> Result<()> {
    if a.layers.len() != b.layers.len() {
        return Err(Error::Format(format!(
            "pyramid layer counts differ: {} vs {}",
            a.layers.len(),
            b.layers.len()
        )));
    }
    for (x, y) in a.layers.iter().zip(&b.layers) {
        if (x.channels, x.height, x.width) != (y.channels, y.height, y.width) {
            return Err(Error::Format("pyramid layer shape mismatch".into()));
        }
    }
    Ok(())
}

/// Value-only deep-feature loss between two precomputed pyramids.
pub fn df_loss_pyramids<T: Real>(a: &FeaturePyramid<T>, b: &FeaturePyramid<T>) -> Result<T> {
    check_pyramid_shapes(a, b)?;
    let mut value = T::zero();
    for (x, y) in a.layers.iter().zip(&b.layers) {
        let norm = lit::<T>(x.len() as f64);
        for (p, q) in x.data.iter().zip(&y.data) {
            let d = *p - *q;
            value += d * d / norm;
        }
    }
    Ok(value)
}

/// Value-only Gram-matrix loss between two precomputed pyramids.
pub fn gm_loss_pyramids<T: Real>(a: &FeaturePyramid<T>, b: &FeaturePyramid<T>) -> Result<T> {
    check_pyramid_shapes(a, b)?;
    let mut value = T::zero();
    for (j, (x, y)) in a.layers.iter().zip(&b.layers).enumerate() {
        let gx = gram(j, x);
        let gy = gram(j, y);
        for (p, q) in gx.matrix.iter().zip(&gy.matrix) {
            let d = *p - *q;
            value += d * d;
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::pixel::mse;

    fn map(w: usize, h: usize, v: Vec<f64>) -> SaliencyMap<f64> {
        SaliencyMap::new(w, h, v).unwrap()
    }

    fn random_map(w: usize, h: usize, seed: u64) -> SaliencyMap<f64> {
        let mut rng = SplitMix64::new(seed);
        map(w, h, (0..w * h).map(|_| rng.next_f64()).collect())
    }

    #[test]
    fn zero_map_gives_zero_pyramid() {
        let f = FeatureExtractor::<f64>::default_seeded(1);
        let pyr = f.extract(&SaliencyMap::zeros(16, 16)).unwrap();
        for layer in &pyr.layers {
            assert!(layer.data.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn identity_extractor_reproduces_input() {
        let f = FeatureExtractor::<f64>::identity();
        let m = random_map(6, 4, 2);
        let pyr = f.extract(&m).unwrap();
        assert_eq!(pyr.layers.len(), 1);
        assert_eq!(pyr.layers[0].data, m.values());
    }

    #[test]
    fn seeded_extractor_is_deterministic() {
        let a = FeatureExtractor::<f64>::default_seeded(0x5EED);
        let b = FeatureExtractor::<f64>::default_seeded(0x5EED);
        for (la, lb) in a.layers().iter().zip(b.layers()) {
            assert_eq!(la.weights, lb.weights);
        }
    }

    #[test]
    fn pyramid_shapes_halve() {
        let f = FeatureExtractor::<f64>::default_seeded(3);
        let pyr = f.extract(&random_map(16, 16, 4)).unwrap();
        let dims: Vec<_> = pyr
            .layers
            .iter()
            .map(|l| (l.channels, l.height, l.width))
            .collect();
        assert_eq!(dims, vec![(8, 8, 8), (16, 4, 4), (32, 2, 2)]);
    }

    #[test]
    fn map_too_small_errors() {
        let f = FeatureExtractor::<f64>::default_seeded(3);
        assert!(f.extract(&random_map(4, 4, 5)).is_err());
    }

    #[test]
    fn df_loss_identity_extractor_equals_mse() {
        let f = FeatureExtractor::<f64>::identity();
        let a = random_map(8, 8, 6);
        let b = random_map(8, 8, 7);
        let df = df_loss(&a, &b, &f).unwrap();
        let ms = mse(&a, &b).unwrap();
        assert!((df.value - ms.value).abs() < 1e-12);
        for (x, y) in df.gradient.iter().zip(&ms.gradient) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn df_loss_zero_at_equal_inputs() {
        let f = FeatureExtractor::<f64>::default_seeded(8);
        let m = random_map(16, 16, 9);
        let r = df_loss(&m, &m, &f).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.gradient.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn gram_forced_arithmetic() {
        let act = Tensor3::from_data(1, 1, 2, vec![1.0, 0.0]);
        let g = gram(0, &act);
        assert_eq!(g.matrix, vec![0.5]);
    }

    #[test]
    fn gram_zero_activation() {
        let act = Tensor3::<f64>::zeros(3, 2, 2);
        let g = gram(0, &act);
        assert!(g.matrix.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gram_symmetric_on_random_activation() {
        let mut rng = SplitMix64::new(10);
        let act = Tensor3::from_data(4, 3, 3, (0..36).map(|_| rng.next_f64()).collect());
        let g = gram(0, &act);
        for a in 0..4 {
            for b in 0..4 {
                assert!((g.matrix[a * 4 + b] - g.matrix[b * 4 + a]).abs() < 1e-12);
            }
        }
        // PSD spot check: x' G x >= 0 for random x
        for trial in 0..5 {
            let mut r2 = SplitMix64::new(100 + trial);
            let x: Vec<f64> = (0..4).map(|_| r2.next_f64() - 0.5).collect();
            let mut quad = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    quad += x[a] * g.matrix[a * 4 + b] * x[b];
                }
            }
            assert!(quad >= -1e-12);
        }
    }

    #[test]
    fn gm_loss_forced_arithmetic() {
        // identity extractor, S=(1,0), Ŝ=(0,0): grams 0.5 and 0 → loss 0.25
        let f = FeatureExtractor::<f64>::identity();
        let s = map(2, 1, vec![1.0, 0.0]);
        let p = map(2, 1, vec![0.0, 0.0]);
        let r = gm_loss(&s, &p, &f).unwrap();
        assert!((r.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gm_loss_zero_at_equal_inputs() {
        let f = FeatureExtractor::<f64>::default_seeded(11);
        let m = random_map(16, 16, 12);
        assert_eq!(gm_loss(&m, &m, &f).unwrap().value, 0.0);
    }

    #[test]
    fn gram_discards_spatial_arrangement() {
        // 1x1-style check with the no-pool identity extractor: permuting
        // pixels leaves the Gram matrix unchanged.
        let f = FeatureExtractor::<f64>::identity();
        let a = map(4, 1, vec![0.1, 0.7, 0.3, 0.9]);
        let b = map(4, 1, vec![0.9, 0.3, 0.7, 0.1]);
        let ga = gram(0, &f.extract(&a).unwrap().layers[0]);
        let gb = gram(0, &f.extract(&b).unwrap().layers[0]);
        assert!((ga.matrix[0] - gb.matrix[0]).abs() < 1e-15);
        // and gm_loss between a map and its permutation is zero
        let r = gm_loss(&a, &b, &f).unwrap();
        assert!(r.value.abs() < 1e-15);
    }
}
