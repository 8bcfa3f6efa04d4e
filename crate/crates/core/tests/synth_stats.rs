//! Statistical and structural checks on the synthetic task generator.

mod common;

use std::collections::BTreeMap;

use slu_denoise::metrics::spans_of;
use slu_denoise::rng::rng_for;
use slu_denoise::synth::{
    build_augmented_corpora, default_grammar, generate_clean_dataset, inject_noise, pseudo_translate,
    AugmentConfig, CleanSizes, NoiseProfile, PseudoTranslator,
};
use slu_denoise::{Corpus, Instance};

fn translator(window: usize) -> PseudoTranslator {
    PseudoTranslator::for_vocabulary(&default_grammar().vocabulary(), window, 3)
}

fn small() -> AugmentConfig {
    AugmentConfig { n_src: 50, n_trans: 600, gen_copies: 1, n_dev: 20, n_test: 100 }
}

/// Fraction of instances whose slot tags differ from their clean tags.
fn slot_error(c: &Corpus) -> f64 {
    let bad = c
        .instances
        .iter()
        .filter(|i| i.hard_labels().unwrap().1 != i.clean.as_ref().unwrap().slots.as_slice())
        .count();
    bad as f64 / c.len() as f64
}

#[test]
fn intent_frequencies_follow_the_template_mixture() {
    let g = default_grammar();
    let schema = g.schema().unwrap();
    let n = 10_000;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut r = common::rng(1);
    for i in 0..n {
        let inst = g.sample(&schema, &mut r, format!("{i}"), None);
        let intent = inst.hard_labels().unwrap().0;
        *counts.entry(schema.intents()[intent].clone()).or_default() += 1;
    }
    for (intent, p) in g.intent_mixture() {
        let expected = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        let got = counts.get(&intent).copied().unwrap_or(0) as f64;
        assert!((got - expected).abs() <= 3.0 * sigma, "{intent}: {got} vs {expected} ± {sigma}");
    }
}

#[test]
fn slot_type_flip_rate_matches_its_probability() {
    let g = default_grammar();
    let schema = g.schema().unwrap();
    let profile = NoiseProfile { p_slot_type_flip: 0.3, ..NoiseProfile::zero() };
    let mut r = common::rng(2);
    let (mut spans, mut flipped, mut i) = (0usize, 0usize, 0u64);
    while spans < 10_000 {
        let clean = g.sample(&schema, &mut r, format!("{i}"), None);
        let noisy = inject_noise(&clean, &profile, &schema, &[], i).unwrap();
        let before = spans_of(clean.hard_labels().unwrap().1);
        let after = spans_of(noisy.hard_labels().unwrap().1);
        assert_eq!(before.len(), after.len());
        for (a, b) in before.iter().zip(&after) {
            assert_eq!((a.start, a.end), (b.start, b.end));
            spans += 1;
            flipped += usize::from(a.slot_type != b.slot_type);
        }
        i += 1;
    }
    let rate = flipped as f64 / spans as f64;
    assert!((rate - 0.3).abs() <= 0.015, "{rate} over {spans} spans");
}

/// (type, source-language words) of every span, sorted.
fn span_values(inst: &Instance, inverse: Option<&PseudoTranslator>) -> Vec<(usize, Vec<String>)> {
    let tags = inst.hard_labels().unwrap().1;
    let mut v: Vec<_> = spans_of(tags)
        .iter()
        .map(|s| {
            let words = inst.tokens[s.start..=s.end]
                .iter()
                .map(|t| inverse.map_or(t.clone(), |inv| inv.map_token(t).unwrap()))
                .collect();
            (s.slot_type, words)
        })
        .collect();
    v.sort();
    v
}

#[test]
fn translation_moves_spans_with_their_tokens() {
    let g = default_grammar();
    let schema = g.schema().unwrap();
    let t = translator(1);
    assert!(t.is_bijective());
    let inverse = t.inverse();
    let mut r = common::rng(4);
    let mut reordered = 0;
    for i in 0..1000u64 {
        let src = g.sample(&schema, &mut r, format!("{i}"), None);
        let out = pseudo_translate(&src, &t, i).unwrap();
        assert_eq!(out.len(), src.len());
        assert_eq!(out.hard_labels().unwrap().0, src.hard_labels().unwrap().0);
        assert_eq!(span_values(&out, Some(&inverse)), span_values(&src, None));
        let back: Vec<String> = out.tokens.iter().map(|w| inverse.map_token(w).unwrap()).collect();
        let (mut a, mut b) = (back.clone(), src.tokens.clone());
        a.sort();
        b.sort();
        assert_eq!(a, b);
        reordered += usize::from(back != src.tokens);
    }
    assert!(reordered > 100, "window 1 should reorder a fair share of utterances, got {reordered}");
}

#[test]
fn window_zero_is_a_pure_token_map() {
    let g = default_grammar();
    let schema = g.schema().unwrap();
    let t = translator(0);
    let mut r = common::rng(5);
    for i in 0..200u64 {
        let src = g.sample(&schema, &mut r, format!("{i}"), None);
        let out = pseudo_translate(&src, &t, i).unwrap();
        assert_eq!(out.slots, src.slots);
        for (a, b) in out.tokens.iter().zip(&src.tokens) {
            assert_eq!(a, &t.map_token(b).unwrap());
        }
    }
}

#[test]
fn generated_data_is_noisier_than_translated_data() {
    let c = build_augmented_corpora(
        &default_grammar(),
        &translator(1),
        &NoiseProfile::translation_default(),
        &NoiseProfile::generation_default(),
        &small(),
        11,
    )
    .unwrap();
    let (trans, gen) = (slot_error(&c.trans), slot_error(&c.gen));
    assert!(gen > trans, "gen {gen} vs trans {trans}");
    assert!(trans > 0.0);
    let intent_err = |c: &Corpus| {
        c.instances.iter().filter(|i| i.hard_labels().unwrap().0 != i.clean.as_ref().unwrap().intent).count()
    };
    assert_eq!(intent_err(&c.trans), 0);
    assert!(intent_err(&c.gen) > 0);
}

#[test]
fn zero_noise_keeps_clean_labels() {
    let g = default_grammar();
    let t = translator(1);
    let gen_profile = NoiseProfile { p_intent_flip: 1e-9, ..NoiseProfile::zero() };
    let c = build_augmented_corpora(&g, &t, &NoiseProfile::zero(), &gen_profile, &small(), 12).unwrap();
    assert_eq!(slot_error(&c.trans), 0.0);
    let clean = generate_clean_dataset(
        &g,
        &t,
        CleanSizes { train: 50, dev: 20, target_train: 600, test: 100 },
        12,
    )
    .unwrap();
    for (a, b) in c.trans.instances.iter().zip(&clean.target_train.instances) {
        assert_eq!(a.tokens, b.tokens);
        assert_eq!(a.hard_labels(), b.hard_labels());
    }
}

#[test]
fn test_split_is_clean_and_independent_of_noise() {
    let g = default_grammar();
    let t = translator(1);
    let noisy = build_augmented_corpora(
        &g,
        &t,
        &NoiseProfile::translation_default(),
        &NoiseProfile::generation_default(),
        &small(),
        13,
    )
    .unwrap();
    let quiet = build_augmented_corpora(
        &g,
        &t,
        &NoiseProfile::zero(),
        &NoiseProfile { p_intent_flip: 0.5, ..NoiseProfile::zero() },
        &small(),
        13,
    )
    .unwrap();
    assert_eq!(noisy.test, quiet.test);
    assert_eq!(noisy.target_dev, quiet.target_dev);
    let target_vocab: std::collections::BTreeSet<String> = t.target_vocabulary().into_iter().collect();
    for inst in &noisy.test.instances {
        assert!(inst.tokens.iter().all(|w| target_vocab.contains(w)));
        assert!(inst.clean.as_ref().is_none_or(|c| Some((c.intent, c.slots.as_slice())) == inst.hard_labels()));
    }
}

#[test]
fn corpora_are_deterministic_in_the_seed() {
    let g = default_grammar();
    let t = translator(1);
    let build = |seed| {
        build_augmented_corpora(
            &g,
            &t,
            &NoiseProfile::translation_default(),
            &NoiseProfile::generation_default(),
            &small(),
            seed,
        )
        .unwrap()
    };
    assert_eq!(build(21), build(21));
    assert_ne!(build(21).trans, build(22).trans);
    let mut a = rng_for(5, &[1, 2]);
    let mut b = rng_for(5, &[1, 2]);
    let schema = g.schema().unwrap();
    assert_eq!(g.sample(&schema, &mut a, "x".into(), None), g.sample(&schema, &mut b, "x".into(), None));
}
