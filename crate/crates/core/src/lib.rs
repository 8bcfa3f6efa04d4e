//! Multi-source denoising for joint intent classification and BIO slot
//! filling: ensemble relabeling, small-loss co-training and
//! uncertainty-based instance re-weighting, trained on synthetic noisy
//! cross-lingual corpora.

pub mod data;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod trainer;
pub mod vocab;

pub use data::{Corpus, Instance, LabelSchema, SoftLabels, Source};
pub use encoder::{ModelParams, Prediction};
pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision parameters, the training default.
pub type Params = ModelParams<f64>;
pub type Params32 = ModelParams<f32>;
pub type Pred = Prediction<f64>;
pub type Pred32 = Prediction<f32>;
pub type Labels = SoftLabels<f64>;
