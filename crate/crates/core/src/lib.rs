//! Saliency-map loss functions with analytic gradients, the matching
//! evaluation metrics, direct-map optimization, and a micro trainer.
//!
//! Everything numeric is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below pin the common concrete choices. File I/O is
//! `f64`-only.

pub mod combo;
pub mod error;
pub mod io;
pub mod loss;
pub mod map;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod scalar;

pub use combo::{preset, EvalResources, LossCombination, Term, TermKind};
pub use error::{Error, Result};
pub use map::{FixationSet, ProbabilityMap, SaliencyMap};
pub use metrics::{MetricConfig, MetricReport};
pub use rng::SplitMix64;
pub use scalar::Real;

pub type SaliencyMap32 = map::SaliencyMap<f32>;
pub type SaliencyMap64 = map::SaliencyMap<f64>;
pub type ProbabilityMap32 = map::ProbabilityMap<f32>;
pub type ProbabilityMap64 = map::ProbabilityMap<f64>;
pub type LossCombination32 = combo::LossCombination<f32>;
pub type LossCombination64 = combo::LossCombination<f64>;
pub type FeatureExtractor32 = loss::perceptual::FeatureExtractor<f32>;
pub type FeatureExtractor64 = loss::perceptual::FeatureExtractor<f64>;
