//! Minimal dense tensor ops: 3x3 same-padding convolution, ReLU,
//! sigmoid, 2x2 average pooling, and their backward passes. Shared by
//! the perceptual feature extractor and the micro trainer.

use crate::scalar::{lit, Real};

/// C×H×W tensor, channel-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn idx(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// 3x3 convolution with zero same-padding.
/// `weights` is laid out [out_ch][in_ch][ky][kx]; `bias` one per out channel.
pub fn conv3x3_forward<T: Real>(
    input: &Tensor3<T>,
    weights: &[T],
    bias: &[T],
    out_ch: usize,
) -> Tensor3<T> {
    let (ic, h, w) = (input.channels, input.height, input.width);
    debug_assert_eq!(weights.len(), out_ch * ic * 9);
    debug_assert_eq!(bias.len(), out_ch);
    let mut out = Tensor3::zeros(out_ch, h, w);
    for o in 0..out_ch {
        for y in 0..h {
            for x in 0..w {
                let mut acc = bias[o];
                for i in 0..ic {
                    for ky in 0..3 {
                        let yy = y as isize + ky as isize - 1;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for kx in 0..3 {
                            let xx = x as isize + kx as isize - 1;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let wv = weights[((o * ic + i) * 3 + ky) * 3 + kx];
                            acc += wv * input.data[input.idx(i, yy as usize, xx as usize)];
                        }
                    }
                }
                let idx = out.idx(o, y, x);
                out.data[idx] = acc;
            }
        }
    }
    out
}

/// Gradient w.r.t. the convolution input.
pub fn conv3x3_backward_data<T: Real>(
    grad_out: &Tensor3<T>,
    weights: &[T],
    in_ch: usize,
) -> Tensor3<T> {
    let (oc, h, w) = (grad_out.channels, grad_out.height, grad_out.width);
    let mut gin = Tensor3::zeros(in_ch, h, w);
    for o in 0..oc {
        for y in 0..h {
            for x in 0..w {
                let g = grad_out.data[grad_out.idx(o, y, x)];
                if g == T::zero() {
                    continue;
                }
                for i in 0..in_ch {
                    for ky in 0..3 {
                        let yy = y as isize + ky as isize - 1;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for kx in 0..3 {
                            let xx = x as isize + kx as isize - 1;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let wv = weights[((o * in_ch + i) * 3 + ky) * 3 + kx];
                            let idx = gin.idx(i, yy as usize, xx as usize);
                            gin.data[idx] += wv * g;
                        }
                    }
                }
            }
        }
    }
    gin
}

/// Gradients w.r.t. weights and biases.
pub fn conv3x3_backward_params<T: Real>(
    grad_out: &Tensor3<T>,
    input: &Tensor3<T>,
) -> (Vec<T>, Vec<T>) {
    let (oc, h, w) = (grad_out.channels, grad_out.height, grad_out.width);
    let ic = input.channels;
    let mut gw = vec![T::zero(); oc * ic * 9];
    let mut gb = vec![T::zero(); oc];
    for o in 0..oc {
        for y in 0..h {
            for x in 0..w {
                let g = grad_out.data[grad_out.idx(o, y, x)];
                gb[o] += g;
                if g == T::zero() {
                    continue;
                }
                for i in 0..ic {
                    for ky in 0..3 {
                        let yy = y as isize + ky as isize - 1;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for kx in 0..3 {
                            let xx = x as isize + kx as isize - 1;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            gw[((o * ic + i) * 3 + ky) * 3 + kx] +=
                                g * input.data[input.idx(i, yy as usize, xx as usize)];
                        }
                    }
                }
            }
        }
    }
    (gw, gb)
}

pub fn relu_forward<T: Real>(t: &Tensor3<T>) -> Tensor3<T> {
    Tensor3 {
        channels: t.channels,
        height: t.height,
        width: t.width,
        data: t.data.iter().map(|v| v.max(T::zero())).collect(),
    }
}

/// Masks the upstream gradient with the sign of the pre-activation.
pub fn relu_backward<T: Real>(grad_out: &Tensor3<T>, pre_act: &Tensor3<T>) -> Tensor3<T> {
    Tensor3 {
        channels: grad_out.channels,
        height: grad_out.height,
        width: grad_out.width,
        data: grad_out
            .data
            .iter()
            .zip(&pre_act.data)
            .map(|(g, z)| if *z > T::zero() { *g } else { T::zero() })
            .collect(),
    }
}

pub fn sigmoid_forward<T: Real>(t: &Tensor3<T>) -> Tensor3<T> {
    Tensor3 {
        channels: t.channels,
        height: t.height,
        width: t.width,
        data: t
            .data
            .iter()
            .map(|v| T::one() / (T::one() + (-*v).exp()))
            .collect(),
    }
}

/// Sigmoid backward expressed through the forward output.
pub fn sigmoid_backward<T: Real>(grad_out: &Tensor3<T>, output: &Tensor3<T>) -> Tensor3<T> {
    Tensor3 {
        channels: grad_out.channels,
        height: grad_out.height,
        width: grad_out.width,
        data: grad_out
            .data
            .iter()
            .zip(&output.data)
            .map(|(g, s)| *g * *s * (T::one() - *s))
            .collect(),
    }
}

/// 2x2 average pooling, stride 2; trailing odd row/column is dropped.
pub fn avgpool2_forward<T: Real>(t: &Tensor3<T>) -> Tensor3<T> {
    let (c, oh, ow) = (t.channels, t.height / 2, t.width / 2);
    let quarter = lit::<T>(0.25);
    let mut out = Tensor3::zeros(c, oh, ow);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let s = t.data[t.idx(ch, 2 * y, 2 * x)]
                    + t.data[t.idx(ch, 2 * y, 2 * x + 1)]
                    + t.data[t.idx(ch, 2 * y + 1, 2 * x)]
                    + t.data[t.idx(ch, 2 * y + 1, 2 * x + 1)];
                let idx = out.idx(ch, y, x);
                out.data[idx] = s * quarter;
            }
        }
    }
    out
}

/// Redistributes each pooled gradient equally over its 2x2 window.
pub fn avgpool2_backward<T: Real>(grad_out: &Tensor3<T>, in_h: usize, in_w: usize) -> Tensor3<T> {
    let c = grad_out.channels;
    let quarter = lit::<T>(0.25);
    let mut gin = Tensor3::zeros(c, in_h, in_w);
    for ch in 0..c {
        for y in 0..grad_out.height {
            for x in 0..grad_out.width {
                let g = grad_out.data[grad_out.idx(ch, y, x)] * quarter;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let idx = gin.idx(ch, 2 * y + dy, 2 * x + dx);
                    gin.data[idx] += g;
                }
            }
        }
    }
    gin
}
