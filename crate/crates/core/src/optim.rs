//! AdamW with bias correction and decoupled weight decay.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::encoder::{Gradients, ModelParams, TENSOR_NAMES};
use crate::error::{io_err, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self { learning_rate: 1e-2, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

/// First and second moment accumulators plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub first_moment: ModelParams<T>,
    pub second_moment: ModelParams<T>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        Self { first_moment: params.zeros_like(), second_moment: params.zeros_like(), step: 0 }
    }
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    format: String,
    step: u64,
    first_moment: Value,
    second_moment: Value,
}

const STATE_FORMAT: &str = "slu-denoise/adamw-state";

impl<T: Scalar> OptimizerState<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&StateFile {
            format: STATE_FORMAT.into(),
            step: self.step,
            first_moment: serde_json::from_str(&self.first_moment.to_checkpoint_json()?)?,
            second_moment: serde_json::from_str(&self.second_moment.to_checkpoint_json()?)?,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: StateFile = serde_json::from_str(s)?;
        if file.format != STATE_FORMAT {
            return Err(Error::Config(format!("unsupported optimizer state {}", file.format)));
        }
        let first_moment = ModelParams::from_checkpoint_json(&file.first_moment.to_string())?;
        let second_moment = ModelParams::from_checkpoint_json(&file.second_moment.to_string())?;
        if !first_moment.same_shape(&second_moment) {
            return Err(Error::Shape("optimizer moments differ in shape".into()));
        }
        Ok(Self { first_moment, second_moment, step: file.step })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(io_err(path))?)
    }
}

impl AdamW {
    /// Applies one update. Non-finite gradients leave params and state untouched.
    pub fn step<T: Scalar>(
        &self,
        params: &mut ModelParams<T>,
        grads: &Gradients<T>,
        state: &mut OptimizerState<T>,
    ) -> Result<()> {
        if !params.same_shape(grads) || !params.same_shape(&state.first_moment) {
            return Err(Error::Shape("optimizer tensors do not match parameters".into()));
        }
        if let Some(i) = grads.tensors().iter().position(|t| t.iter().any(|g| !g.is_finite())) {
            return Err(Error::NonFiniteGradient(TENSOR_NAMES[i]));
        }
        state.step += 1;
        let t = state.step as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let lr = T::of(self.learning_rate);
        let eps = T::of(self.eps);
        let decay = T::of(self.learning_rate * self.weight_decay);
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);
        let one = T::one();

        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(state.first_moment.tensors_mut().into_iter().zip(state.second_moment.tensors_mut()));
        for ((theta, g), (m, v)) in tensors {
            for i in 0..theta.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                if decay != T::zero() {
                    theta[i] -= decay * theta[i];
                }
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
