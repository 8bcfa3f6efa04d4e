//! Analytic gradients against central finite differences, for the plain
//! and the uncertainty-weighted objective.

mod common;

use common::gradcheck::{check, hard_objective, weighted_objective, Objective, INTENTS, TAGS, TOLERANCE, VOCAB, WIDTH};
use slu_denoise::encoder::TENSOR_NAMES;
use slu_denoise::Labels;

fn assert_passes(counts: [usize; 7], worst: [f64; 7]) {
    for t in 0..7 {
        println!("{:<10} {} coordinates, worst relative error {:.2e}", TENSOR_NAMES[t], counts[t], worst[t]);
        assert!(counts[t] >= 200, "{}: only {} coordinates", TENSOR_NAMES[t], counts[t]);
        assert!(worst[t] < TOLERANCE, "{}: relative error {:e}", TENSOR_NAMES[t], worst[t]);
    }
}

#[test]
fn plain_objective_matches_finite_differences() {
    let (counts, worst) = check(hard_objective, 11);
    assert_passes(counts, worst);
}

#[test]
fn weighted_objective_matches_finite_differences() {
    let (counts, worst) = check(weighted_objective, 12);
    assert_passes(counts, worst);
}

#[test]
fn weighted_gradient_is_w_times_plain_gradient() {
    let mut r = common::rng(5);
    let params = common::random_params(VOCAB, WIDTH, INTENTS, TAGS, 0.6, &mut r);
    let tokens = [3, 1, 4, 1, 5];
    let labels = Labels {
        intent: common::random_dist(INTENTS, &mut r),
        slots: (0..tokens.len()).map(|_| common::random_dist(TAGS, &mut r)).collect(),
    };
    let w = (-0.37f64).exp();
    let plain = Objective::Weighted { labels: labels.clone(), w: 1.0 }.gradient(&params, &tokens);
    let weighted = Objective::Weighted { labels, w }.gradient(&params, &tokens);
    for (a, b) in plain.tensors().iter().zip(weighted.tensors()) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((w * x - y).abs() <= 1e-15 * (1.0 + x.abs()), "{x} {y}");
        }
    }
}

#[test]
fn unused_embedding_rows_get_no_gradient() {
    let mut r = common::rng(8);
    let params = common::random_params(VOCAB, WIDTH, INTENTS, TAGS, 0.6, &mut r);
    let tokens = [2, 7, 2];
    let g = Objective::Hard { intent: 1, slots: vec![0, 3, 4] }.gradient(&params, &tokens);
    for row in (0..VOCAB).filter(|v| !tokens.contains(v)) {
        assert!(g.embeddings.row(row).iter().all(|&x| x == 0.0));
    }
}
