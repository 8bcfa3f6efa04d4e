//! Small training fixture and a trainer-free reference training loop.

use slu_denoise::encoder::{backward, forward, init_params};
use slu_denoise::losses::{cross_entropy, logit_gradient, Target};
use slu_denoise::optim::OptimizerState;
use slu_denoise::rng::epoch_order;
use slu_denoise::synth::{build_augmented_corpora, default_grammar, AugmentConfig, NoiseProfile, PseudoTranslator};
use slu_denoise::trainer::{default_assignment, model_seed, train_denoise, TrainConfig, TrainOutcome};
use slu_denoise::vocab::Vocabulary;
use slu_denoise::{Corpus, Params};

pub struct Fixture {
    pub src: Corpus,
    pub trans: Corpus,
    pub gen: Corpus,
    pub test: Corpus,
    pub vocab: Vocabulary,
}

impl Fixture {
    pub fn new() -> Self {
        let g = default_grammar();
        let t = PseudoTranslator::for_vocabulary(&g.vocabulary(), 1, 5);
        let c = build_augmented_corpora(
            &g,
            &t,
            &NoiseProfile::translation_default(),
            &NoiseProfile::generation_default(),
            &AugmentConfig { n_src: 60, n_trans: 60, gen_copies: 1, n_dev: 10, n_test: 40 },
            9,
        )
        .unwrap();
        let vocab = Vocabulary::from_corpora([&c.src, &c.trans, &c.gen]);
        Self { src: c.src, trans: c.trans, gen: c.gen, test: c.test, vocab }
    }

    pub fn train(&self, cfg: &TrainConfig) -> TrainOutcome<f64> {
        train_denoise(&[&self.src, &self.trans, &self.gen], &self.vocab, cfg, &[&self.test]).unwrap()
    }
}

pub fn base(models: usize) -> TrainConfig {
    TrainConfig {
        models,
        corpus_assignment: default_assignment(models),
        init_epochs: 2,
        total_epochs: 4,
        batch_size: 16,
        width: 8,
        seed: 3,
        ..TrainConfig::default()
    }
}

/// Mini-batch AdamW on the mean hard-label loss, written without the trainer.
pub fn plain_training(f: &Fixture, cfg: &TrainConfig) -> Params {
    let schema = &f.src.schema;
    let data: Vec<(Vec<usize>, usize, Vec<usize>)> = [&f.src, &f.trans, &f.gen]
        .iter()
        .flat_map(|c| c.instances.iter())
        .map(|i| {
            let (intent, slots) = i.hard_labels().unwrap();
            (f.vocab.encode(&i.tokens), intent, slots.to_vec())
        })
        .collect();
    let mut params = init_params::<f64>(f.vocab.len(), cfg.width, schema, model_seed(cfg.seed, 0)).unwrap();
    let mut state = OptimizerState::new(&params);
    let opt = cfg.optimizer();
    for epoch in 1..=cfg.total_epochs {
        for chunk in epoch_order(cfg.seed, epoch, 0, data.len()).chunks(cfg.batch_size) {
            let scale = 1.0 / chunk.len() as f64;
            let mut grads = params.zeros_like();
            for &i in chunk {
                let (tokens, intent, slots) = &data[i];
                let pred = forward(&params, tokens).unwrap();
                let target = Target::Hard { intent: *intent, slots };
                assert!(cross_entropy(&pred, target).unwrap().is_finite());
                let up = logit_gradient(&pred, target, scale).unwrap();
                backward(&params, tokens, &pred, &up, &mut grads).unwrap();
            }
            opt.step(&mut params, &grads, &mut state).unwrap();
        }
    }
    params
}

pub fn bit_identical(a: &Params, b: &Params) -> bool {
    a.tensors().iter().zip(b.tensors()).all(|(x, y)| x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits()))
}
