//! AdamW against a scalar re-implementation of the update rule.

mod common;

use slu_denoise::optim::{AdamW, OptimizerState};

struct Scalar {
    theta: f64,
    m: f64,
    v: f64,
}

fn oracle_step(s: &mut Scalar, g: f64, t: i32, o: &AdamW) {
    s.m = o.beta1 * s.m + (1.0 - o.beta1) * g;
    s.v = o.beta2 * s.v + (1.0 - o.beta2) * g * g;
    let m_hat = s.m / (1.0 - o.beta1.powi(t));
    let v_hat = s.v / (1.0 - o.beta2.powi(t));
    s.theta -= o.learning_rate * o.weight_decay * s.theta;
    s.theta -= o.learning_rate * m_hat / (v_hat.sqrt() + o.eps);
}

fn run(opt: AdamW, seed: u64) {
    let mut r = common::rng(seed);
    let mut params = common::random_params(4, 3, 2, 3, 1.0, &mut r);
    let mut state = OptimizerState::new(&params);
    let mut oracle: Vec<Vec<Scalar>> = params
        .tensors()
        .iter()
        .map(|t| t.iter().map(|&x| Scalar { theta: x, m: 0.0, v: 0.0 }).collect())
        .collect();
    for t in 1..=3 {
        let grads = common::random_params(4, 3, 2, 3, 2.0, &mut r);
        opt.step(&mut params, &grads, &mut state).unwrap();
        for (o, g) in oracle.iter_mut().zip(grads.tensors()) {
            for (s, &gi) in o.iter_mut().zip(g.iter()) {
                oracle_step(s, gi, t, &opt);
            }
        }
    }
    assert_eq!(state.step, 3);
    for (o, p) in oracle.iter().zip(params.tensors()) {
        for (s, &x) in o.iter().zip(p.iter()) {
            assert!((s.theta - x).abs() < 1e-12, "{} vs {x}", s.theta);
        }
    }
}

#[test]
fn three_steps_match_oracle() {
    run(AdamW::default(), 1);
    run(AdamW { learning_rate: 0.05, beta1: 0.8, beta2: 0.99, eps: 1e-6, weight_decay: 0.0 }, 2);
}

#[test]
fn three_steps_with_decay_match_oracle() {
    run(AdamW { learning_rate: 0.01, weight_decay: 0.1, ..AdamW::default() }, 3);
}

#[test]
fn first_step_magnitude_is_learning_rate() {
    let mut r = common::rng(9);
    let opt = AdamW { learning_rate: 0.003, ..AdamW::default() };
    let mut params = common::random_params(3, 2, 2, 3, 1.0, &mut r);
    let before = params.clone();
    let mut state = OptimizerState::new(&params);
    let grads = common::random_params(3, 2, 2, 3, 1.0, &mut r);
    opt.step(&mut params, &grads, &mut state).unwrap();
    for ((a, b), g) in params.tensors().iter().zip(before.tensors()).zip(grads.tensors()) {
        for ((x, y), gi) in a.iter().zip(b.iter()).zip(g.iter()) {
            let expected = 0.003 * gi.abs() / (gi.abs() + opt.eps);
            assert!(((y - x).abs() - expected).abs() < 1e-15);
        }
    }
}
