//! Central finite-difference check of the analytic gradients.

use rand::seq::SliceRandom;
use rand::Rng;
use slu_denoise::encoder::{backward, forward};
use slu_denoise::losses::{cross_entropy, logit_gradient, weighted_joint_loss, Target};
use slu_denoise::{Labels, Params};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
pub const INSTANCES: usize = 20;
pub const PER_INSTANCE: usize = 10;
/// Both sides below this are treated as an exact zero gradient.
pub const ZERO: f64 = 1e-9;

pub const VOCAB: usize = 15;
pub const WIDTH: usize = 6;
pub const INTENTS: usize = 4;
pub const TAGS: usize = 7;

pub enum Objective {
    Hard { intent: usize, slots: Vec<usize> },
    Weighted { labels: Labels, w: f64 },
}

impl Objective {
    pub fn loss(&self, params: &Params, tokens: &[usize]) -> f64 {
        let pred = forward(params, tokens).unwrap();
        match self {
            Objective::Hard { intent, slots } => cross_entropy(&pred, Target::Hard { intent: *intent, slots }).unwrap(),
            Objective::Weighted { labels, w } => weighted_joint_loss(&pred, labels, *w).unwrap(),
        }
    }

    pub fn gradient(&self, params: &Params, tokens: &[usize]) -> Params {
        let pred = forward(params, tokens).unwrap();
        let up = match self {
            Objective::Hard { intent, slots } => {
                logit_gradient(&pred, Target::Hard { intent: *intent, slots }, 1.0).unwrap()
            }
            Objective::Weighted { labels, w } => logit_gradient(&pred, Target::Soft(labels), *w).unwrap(),
        };
        let mut g = params.zeros_like();
        backward(params, tokens, &pred, &up, &mut g).unwrap();
        g
    }
}

pub fn rel_error(a: f64, n: f64) -> f64 {
    if a.abs() < ZERO && n.abs() < ZERO {
        0.0
    } else {
        (a - n).abs() / a.abs().max(n.abs())
    }
}

/// Returns (checks per tensor, worst relative error per tensor).
pub fn check(objective_for: impl Fn(&mut rand_chacha::ChaCha8Rng, usize) -> Objective, seed: u64) -> ([usize; 7], [f64; 7]) {
    let mut r = super::rng(seed);
    let mut counts = [0usize; 7];
    let mut worst = [0f64; 7];
    for _ in 0..INSTANCES {
        let len = r.gen_range(1..=7);
        let tokens: Vec<usize> = (0..len).map(|_| r.gen_range(0..VOCAB)).collect();
        let params = super::random_params(VOCAB, WIDTH, INTENTS, TAGS, 0.6, &mut r);
        let objective = objective_for(&mut r, len);
        let grads = objective.gradient(&params, &tokens);
        let shapes = params.tensor_shapes();
        for t in 0..7 {
            let (rows, cols) = shapes[t];
            for _ in 0..PER_INSTANCE {
                // embedding rows outside the utterance have no gradient; sample used rows
                let row = if t == 0 { *tokens.choose(&mut r).unwrap() } else { r.gen_range(0..rows) };
                let idx = row * cols + r.gen_range(0..cols);
                let mut plus = params.clone();
                plus.tensors_mut()[t][idx] += STEP;
                let mut minus = params.clone();
                minus.tensors_mut()[t][idx] -= STEP;
                let numeric = (objective.loss(&plus, &tokens) - objective.loss(&minus, &tokens)) / (2.0 * STEP);
                let analytic = grads.tensors()[t][idx];
                worst[t] = worst[t].max(rel_error(analytic, numeric));
                counts[t] += 1;
            }
        }
    }
    (counts, worst)
}

pub fn hard_objective(r: &mut rand_chacha::ChaCha8Rng, len: usize) -> Objective {
    Objective::Hard { intent: r.gen_range(0..INTENTS), slots: (0..len).map(|_| r.gen_range(0..TAGS)).collect() }
}

pub fn weighted_objective(r: &mut rand_chacha::ChaCha8Rng, len: usize) -> Objective {
    Objective::Weighted {
        labels: Labels {
            intent: super::random_dist(INTENTS, r),
            slots: (0..len).map(|_| super::random_dist(TAGS, r)).collect(),
        },
        w: (-r.gen_range(0.0..1.5f64)).exp(),
    }
}
