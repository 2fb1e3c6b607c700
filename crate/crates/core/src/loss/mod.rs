//! Loss functionals over saliency maps, each returning its value together
//! with the analytic gradient with respect to the prediction.

pub mod distribution;
pub mod perceptual;
pub mod pixel;
pub mod saliency;

use crate::scalar::Real;

/// Value of a loss plus ∂L/∂Ŝ, flattened row-major to match the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult<T> {
    pub value: T,
    pub gradient: Vec<T>,
}

impl<T: Real> LossResult<T> {
    pub fn new(value: T, gradient: Vec<T>) -> Self {
        Self { value, gradient }
    }

    pub fn zero(len: usize) -> Self {
        Self {
            value: T::zero(),
            gradient: vec![T::zero(); len],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.gradient.iter().all(|g| g.is_finite())
    }
}
