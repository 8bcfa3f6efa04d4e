#![allow(dead_code)]

pub mod gradcheck;
pub mod training;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slu_denoise::{LabelSchema, Params};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn schema(intents: usize, slot_types: usize) -> LabelSchema {
    LabelSchema::new(
        (0..intents).map(|i| format!("intent{i}")).collect(),
        (0..slot_types).map(|t| format!("type{t}")).collect(),
    )
    .unwrap()
}

/// Parameters drawn uniformly from (-scale, scale).
pub fn random_params(vocab: usize, width: usize, n_intents: usize, n_tags: usize, scale: f64, r: &mut ChaCha8Rng) -> Params {
    let mut p = Params::zeros(vocab, width, n_intents, n_tags);
    for t in p.tensors_mut() {
        for x in t.iter_mut() {
            *x = r.gen_range(-scale..scale);
        }
    }
    p
}

pub fn random_dist(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| r.gen_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Every file under `root`, keyed by relative path.
pub fn snapshot(root: &std::path::Path) -> std::collections::BTreeMap<std::path::PathBuf, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut std::collections::BTreeMap<std::path::PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// A run matrix small enough for unit-speed harness checks.
pub fn tiny_experiment(variants: &[slu_denoise::harness::Variant], seeds: &[u64]) -> slu_denoise::harness::ExperimentConfig {
    let mut cfg = slu_denoise::harness::ExperimentConfig::default();
    cfg.data.n_src = 60;
    cfg.data.n_trans = 60;
    cfg.data.n_dev = 20;
    cfg.data.n_test = 40;
    cfg.train.init_epochs = 2;
    cfg.train.total_epochs = 4;
    cfg.train.width = 8;
    cfg.train.batch_size = 16;
    cfg.variants = variants.to_vec();
    cfg.seeds = seeds.to_vec();
    cfg
}
