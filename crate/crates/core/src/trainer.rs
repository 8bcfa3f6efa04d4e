//! Denoising training: per-corpus initialization, then a relabeling stage
//! combining small-loss co-training, uncertainty re-weighting and ensemble
//! relabeling of augmented instances.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Corpus, Instance, IntentLabel, SlotLabels, SoftLabels, Source};
use crate::encoder::{backward, forward, init_params, mean_prediction, ModelParams, Prediction};
use crate::error::{Error, Result};
use crate::losses::{cross_entropy, ensemble_relabel, instance_uncertainty, instance_weight, logit_gradient, Target};
use crate::metrics::{evaluate, EvalResult};
use crate::optim::{AdamW, OptimizerState};
use crate::rng::{derive_seed, epoch_order};
use crate::scalar::Scalar;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    ExactMatch,
    SlotF1,
    IntentAccuracy,
    /// Mean of the three metrics above.
    Average,
}

impl SelectionMetric {
    pub fn of(self, r: &EvalResult) -> f64 {
        match self {
            SelectionMetric::ExactMatch => r.exact_match,
            SelectionMetric::SlotF1 => r.slot_f1,
            SelectionMetric::IntentAccuracy => r.intent_accuracy,
            SelectionMetric::Average => (r.exact_match + r.slot_f1 + r.intent_accuracy) / 3.0,
        }
    }
}

/// Keep the epoch checkpoint that scores best on one evaluation corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DevSelection {
    pub corpus: String,
    pub metric: SelectionMetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Number of co-trained models (K).
    pub models: usize,
    /// Initialization epochs (E); the relabeling stage covers epochs E+1..=E_all.
    pub init_epochs: usize,
    /// Total epochs (E_all).
    pub total_epochs: usize,
    pub batch_size: usize,
    /// Maximum filtering rate.
    pub delta_max: f64,
    /// Relabeling epochs over which the filtering rate ramps up linearly.
    pub delta_ramp_epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    /// Embedding width d.
    pub width: usize,
    pub seed: u64,
    /// Corpus names each model trains on during initialization.
    pub corpus_assignment: Vec<Vec<String>>,
    pub relabel_exempt: Vec<Source>,
    pub relabel: bool,
    pub cotrain: bool,
    pub reweight: bool,
    /// Relabel the whole corpus at epoch end instead of per batch.
    pub full_corpus_relabel: bool,
    pub dev_selection: Option<DevSelection>,
    /// Sequential model update order within a batch; empty means all
    /// models update concurrently.
    pub update_order: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            models: 2,
            init_epochs: 6,
            total_epochs: 20,
            batch_size: 64,
            delta_max: 0.2,
            delta_ramp_epochs: 2,
            learning_rate: 5e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.0,
            width: crate::encoder::DEFAULT_WIDTH,
            seed: 0,
            corpus_assignment: default_assignment(2),
            relabel_exempt: vec![Source::Src],
            relabel: true,
            cotrain: true,
            reweight: true,
            full_corpus_relabel: false,
            dev_selection: None,
            update_order: Vec::new(),
        }
    }
}

/// Per-model initialization corpora: {src, trans}, {src, trans, gen},
/// {src, gen}; a single model gets everything.
pub fn default_assignment(models: usize) -> Vec<Vec<String>> {
    let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match models {
        0 => vec![],
        1 => vec![v(&["src", "trans", "gen"])],
        k => {
            let base = [v(&["src", "trans"]), v(&["src", "trans", "gen"]), v(&["src", "gen"])];
            (0..k).map(|i| base[i % 3].clone()).collect()
        }
    }
}

impl TrainConfig {
    pub fn optimizer(&self) -> AdamW {
        AdamW {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.models == 0 {
            return fail("need at least one model");
        }
        if self.init_epochs > self.total_epochs {
            return fail("initialization epochs exceed total epochs");
        }
        if self.batch_size == 0 {
            return fail("batch size must be positive");
        }
        if !(0.0..1.0).contains(&self.delta_max) {
            return fail("filtering rate must lie in [0, 1)");
        }
        if self.width == 0 {
            return fail("embedding width must be positive");
        }
        if self.corpus_assignment.len() != self.models {
            return fail("corpus assignment needs one entry per model");
        }
        if self.corpus_assignment.iter().any(Vec::is_empty) {
            return fail("every model needs at least one corpus");
        }
        if !self.update_order.is_empty() {
            let mut o = self.update_order.clone();
            o.sort_unstable();
            if o != (0..self.models).collect::<Vec<_>>() {
                return fail("update order must be a permutation of model indices");
            }
        }
        Ok(())
    }

    /// Filtering rate for 1-based epoch `epoch`; zero during initialization.
    pub fn delta_at(&self, epoch: usize) -> f64 {
        if epoch <= self.init_epochs {
            return 0.0;
        }
        if self.delta_ramp_epochs == 0 {
            return self.delta_max;
        }
        let progress = (epoch - self.init_epochs) as f64 / self.delta_ramp_epochs as f64;
        self.delta_max * progress.min(1.0)
    }

    /// Union of all assigned corpora, in order of first appearance.
    pub fn union_corpora(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for name in self.corpus_assignment.iter().flatten() {
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
        out
    }
}

/// Parameter seed of model `k`.
pub fn model_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, &[k as u64])
}

/// Number of instances kept out of `n` at filtering rate `delta`:
/// `ceil((1 - delta) n)`, snapping products within 1e-9 of an integer.
pub fn keep_count(n: usize, delta: f64) -> usize {
    let x = (1.0 - delta) * n as f64;
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (k as usize).min(n)
}

/// Indices (in batch order) of the `keep_count` smallest losses; ties go
/// to the earlier instance.
pub fn select_small_loss<T: Scalar>(losses: &[T], delta: f64) -> Result<Vec<usize>> {
    if losses.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("filtering rate {delta} outside [0, 1)")));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("non-finite loss".into()));
    }
    let keep = keep_count(losses.len(), delta);
    let mut ranked: Vec<usize> = (0..losses.len()).collect();
    ranked.sort_by(|&a, &b| losses[a].partial_cmp(&losses[b]).expect("finite").then(a.cmp(&b)));
    let mut kept = ranked[..keep].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Init,
    Relabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub stage: Stage,
    pub delta: f64,
    /// Mean training loss per model over the instances it trained on.
    pub model_losses: Vec<f64>,
    /// Fraction of (model, instance) visits discarded by selection.
    pub filtered_frac: f64,
    pub mean_weight: f64,
    /// Fraction of relabelable instances whose argmax labels changed.
    pub relabel_changed_frac: f64,
    pub metrics: BTreeMap<String, EvalResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoredLabels<T> {
    Hard { intent: usize, slots: Vec<usize> },
    Soft(SoftLabels<T>),
}

impl<T: Scalar> StoredLabels<T> {
    fn target(&self) -> Target<'_, T> {
        match self {
            StoredLabels::Hard { intent, slots } => Target::Hard { intent: *intent, slots },
            StoredLabels::Soft(s) => Target::Soft(s),
        }
    }

    fn argmax(&self) -> (usize, Vec<usize>) {
        match self {
            StoredLabels::Hard { intent, slots } => (*intent, slots.clone()),
            StoredLabels::Soft(s) => s.argmax(),
        }
    }

    fn from_instance(inst: &Instance, schema: &crate::data::LabelSchema) -> Result<Self> {
        Ok(match inst.hard_labels() {
            Some((intent, slots)) => StoredLabels::Hard { intent, slots: slots.to_vec() },
            None => StoredLabels::Soft(inst.soft_labels(schema)?),
        })
    }
}

struct Item<T> {
    tokens: Vec<usize>,
    source: Source,
    corpus: usize,
    index: usize,
    labels: StoredLabels<T>,
}

pub struct TrainOutcome<T> {
    pub models: Vec<ModelParams<T>>,
    pub optimizer_states: Vec<OptimizerState<T>>,
    pub reports: Vec<EpochReport>,
    /// Training corpora (union order) carrying the final stored labels.
    pub relabeled: Vec<Corpus>,
    /// Epoch whose parameters were returned.
    pub selected_epoch: usize,
}

struct Trainer<'a, T> {
    config: &'a TrainConfig,
    optimizer: AdamW,
    items: Vec<Item<T>>,
    corpora: Vec<&'a Corpus>,
    models: Vec<ModelParams<T>>,
    states: Vec<OptimizerState<T>>,
}

#[derive(Default)]
struct EpochTally {
    loss_sum: Vec<f64>,
    loss_n: Vec<usize>,
    filtered: usize,
    visits: usize,
    weight_sum: f64,
    weight_n: usize,
    changed: usize,
}

impl<'a, T: Scalar> Trainer<'a, T> {
    fn diverged(epoch: usize, what: &str) -> Error {
        Error::Diverged { epoch, message: format!("non-finite {what}") }
    }

    /// One optimizer step of model `k` on `batch` with per-instance
    /// gradient scales; returns the summed unscaled loss.
    fn update_model(
        optimizer: &AdamW,
        model: &mut ModelParams<T>,
        state: &mut OptimizerState<T>,
        items: &[Item<T>],
        batch: &[(usize, T)],
        preds: Option<&[Prediction<T>]>,
        epoch: usize,
    ) -> Result<f64> {
        let mut grads = model.zeros_like();
        let mut loss_sum = 0.0;
        for (pos, &(i, scale)) in batch.iter().enumerate() {
            let item = &items[i];
            let owned;
            let pred = match preds {
                Some(p) => &p[pos],
                None => {
                    owned = forward(model, &item.tokens)?;
                    &owned
                }
            };
            let target = item.labels.target();
            let loss = cross_entropy(pred, target)?.to_f64_lossy();
            if !loss.is_finite() {
                return Err(Self::diverged(epoch, "loss"));
            }
            loss_sum += loss;
            let up = logit_gradient(pred, target, scale)?;
            backward(model, &item.tokens, pred, &up, &mut grads)?;
        }
        match optimizer.step(model, &grads, state) {
            Err(Error::NonFiniteGradient(t)) => Err(Self::diverged(epoch, &format!("gradient in {t}"))),
            other => other.map(|_| loss_sum),
        }
    }

    fn init_epoch(&mut self, epoch: usize, assigned: &[Vec<usize>], tally: &mut EpochTally) -> Result<()> {
        let batch_size = self.config.batch_size;
        let seed = self.config.seed;
        let optimizer = self.optimizer;
        let items = &self.items;
        let results: Vec<Result<(f64, usize)>> = self
            .models
            .par_iter_mut()
            .zip(self.states.par_iter_mut())
            .zip(assigned.par_iter())
            .enumerate()
            .map(|(k, ((model, state), pool))| {
                let order = epoch_order(seed, epoch, k, pool.len());
                let mut sum = 0.0;
                for chunk in order.chunks(batch_size) {
                    let scale = T::one() / T::from_usize_lossy(chunk.len());
                    let batch: Vec<(usize, T)> = chunk.iter().map(|&o| (pool[o], scale)).collect();
                    sum += Self::update_model(&optimizer, model, state, items, &batch, None, epoch)?;
                }
                Ok((sum, pool.len()))
            })
            .collect();
        for (k, r) in results.into_iter().enumerate() {
            let (sum, n) = r?;
            tally.loss_sum[k] += sum;
            tally.loss_n[k] += n;
        }
        Ok(())
    }

    fn relabel_items(&mut self, indices: &[usize], tally: &mut EpochTally) -> Result<()> {
        let models = &self.models;
        let items = &self.items;
        let new_labels: Vec<Option<SoftLabels<T>>> = indices
            .par_iter()
            .map(|&i| {
                let item = &items[i];
                if self.config.relabel_exempt.contains(&item.source) {
                    return Ok(None);
                }
                let preds = models
                    .iter()
                    .map(|m| forward(m, &item.tokens).map(|mut p| {
                        p.cache = None;
                        p
                    }))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Some(ensemble_relabel(&preds)?))
            })
            .collect::<Result<_>>()?;
        for (&i, labels) in indices.iter().zip(new_labels) {
            if let Some(labels) = labels {
                let item = &mut self.items[i];
                if item.labels.argmax() != labels.argmax() {
                    tally.changed += 1;
                }
                item.labels = StoredLabels::Soft(labels);
            }
        }
        Ok(())
    }

    fn relabel_epoch(&mut self, epoch: usize, union: &[usize], tally: &mut EpochTally) -> Result<()> {
        let cfg = self.config;
        let delta = cfg.delta_at(epoch);
        let k_models = cfg.models;
        let order = epoch_order(cfg.seed, epoch, 0, union.len());
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<usize> = chunk.iter().map(|&o| union[o]).collect();
            let items = &self.items;
            // snapshot predictions of every model at batch start
            let preds: Vec<Vec<Prediction<T>>> = self
                .models
                .par_iter()
                .map(|m| batch.iter().map(|&i| forward(m, &items[i].tokens)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?;
            let losses: Vec<Vec<T>> = preds
                .iter()
                .map(|pk| {
                    pk.iter()
                        .zip(&batch)
                        .map(|(p, &i)| cross_entropy(p, items[i].labels.target()))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            if losses.iter().flatten().any(|l| !l.is_finite()) {
                return Err(Self::diverged(epoch, "selection loss"));
            }
            let weights: Vec<T> = (0..batch.len())
                .map(|pos| {
                    if cfg.reweight {
                        let per_model: Vec<&Prediction<T>> = preds.iter().map(|pk| &pk[pos]).collect();
                        instance_weight(instance_uncertainty(&per_model)?)
                    } else {
                        Ok(T::one())
                    }
                })
                .collect::<Result<_>>()?;
            tally.weight_sum += weights.iter().map(|w| w.to_f64_lossy()).sum::<f64>();
            tally.weight_n += batch.len();

            let kept: Vec<Vec<usize>> = (0..k_models)
                .map(|k| {
                    if !cfg.cotrain {
                        return Ok((0..batch.len()).collect());
                    }
                    let others: Vec<T> = (0..batch.len())
                        .map(|pos| {
                            let mut s = T::zero();
                            for (j, lj) in losses.iter().enumerate() {
                                if j != k || k_models == 1 {
                                    s += lj[pos];
                                }
                            }
                            s
                        })
                        .collect();
                    select_small_loss(&others, delta)
                })
                .collect::<Result<_>>()?;

            let optimizer = self.optimizer;
            let step = |k: usize, model: &mut ModelParams<T>, state: &mut OptimizerState<T>| -> Result<f64> {
                let scale_n = T::from_usize_lossy(kept[k].len());
                let sub: Vec<(usize, T)> = kept[k].iter().map(|&pos| (batch[pos], weights[pos] / scale_n)).collect();
                let sub_preds: Vec<Prediction<T>> = kept[k].iter().map(|&pos| preds[k][pos].clone()).collect();
                Self::update_model(&optimizer, model, state, items, &sub, Some(&sub_preds), epoch)
            };
            let sums: Vec<f64> = if cfg.update_order.is_empty() {
                self.models
                    .par_iter_mut()
                    .zip(self.states.par_iter_mut())
                    .enumerate()
                    .map(|(k, (m, s))| step(k, m, s))
                    .collect::<Result<_>>()?
            } else {
                let mut sums = vec![0.0; k_models];
                for &k in &cfg.update_order {
                    sums[k] = step(k, &mut self.models[k], &mut self.states[k])?;
                }
                sums
            };
            for k in 0..k_models {
                tally.loss_sum[k] += sums[k];
                tally.loss_n[k] += kept[k].len();
                tally.filtered += batch.len() - kept[k].len();
                tally.visits += batch.len();
            }
            if cfg.relabel && !cfg.full_corpus_relabel {
                self.relabel_items(&batch, tally)?;
            }
        }
        if cfg.relabel && cfg.full_corpus_relabel {
            self.relabel_items(union, tally)?;
        }
        Ok(())
    }

    fn relabeled_corpora(&self) -> Result<Vec<Corpus>> {
        let mut instances: Vec<Vec<Instance>> = self.corpora.iter().map(|c| c.instances.clone()).collect();
        for item in &self.items {
            if let StoredLabels::Soft(s) = &item.labels {
                let s = s.to_f64();
                let inst = &mut instances[item.corpus][item.index];
                inst.intent = IntentLabel::Soft(s.intent);
                inst.slots = SlotLabels::Soft(s.slots);
            }
        }
        self.corpora
            .iter()
            .zip(instances)
            .map(|(c, insts)| Ok(Corpus { name: c.name.clone(), schema: c.schema.clone(), instances: insts }))
            .collect()
    }
}

/// Runs initialization and relabeling stages over the named training
/// corpora, evaluating the ensemble on `eval_sets` after every epoch.
pub fn train_denoise<T: Scalar>(
    corpora: &[&Corpus],
    vocab: &Vocabulary,
    config: &TrainConfig,
    eval_sets: &[&Corpus],
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let schema = &corpora
        .first()
        .ok_or_else(|| Error::Config("no training corpora".into()))?
        .schema;
    if corpora.iter().chain(eval_sets).any(|c| &c.schema != schema) {
        return Err(Error::Config("corpora do not share one schema".into()));
    }
    let union_names = config.union_corpora();
    let mut used: Vec<&Corpus> = Vec::new();
    for name in &union_names {
        let c = corpora
            .iter()
            .find(|c| &c.name == name)
            .ok_or_else(|| Error::Config(format!("assigned corpus {name} not provided")))?;
        used.push(c);
    }
    let mut items = Vec::new();
    let mut ranges = Vec::new();
    for (ci, c) in used.iter().enumerate() {
        let start = items.len();
        for (ii, inst) in c.instances.iter().enumerate() {
            items.push(Item {
                tokens: vocab.encode(&inst.tokens),
                source: inst.source,
                corpus: ci,
                index: ii,
                labels: StoredLabels::from_instance(inst, schema)?,
            });
        }
        ranges.push(start..items.len());
    }
    let assigned: Vec<Vec<usize>> = config
        .corpus_assignment
        .iter()
        .map(|names| {
            names
                .iter()
                .flat_map(|n| ranges[union_names.iter().position(|u| u == n).expect("in union")].clone())
                .collect()
        })
        .collect();
    let union: Vec<usize> = (0..items.len()).collect();
    if union.is_empty() {
        return Err(Error::Config("training corpora are empty".into()));
    }

    let models = (0..config.models)
        .map(|k| init_params::<T>(vocab.len(), config.width, schema, model_seed(config.seed, k)))
        .collect::<Result<Vec<_>>>()?;
    let states = models.iter().map(OptimizerState::new).collect();
    let mut tr = Trainer { config, optimizer: config.optimizer(), items, corpora: used, models, states };
    let relabelable =
        tr.items.iter().filter(|i| !config.relabel_exempt.contains(&i.source)).count();

    let mut reports = Vec::new();
    let mut best: Option<(f64, usize, Vec<ModelParams<T>>, Vec<OptimizerState<T>>)> = None;
    for epoch in 1..=config.total_epochs {
        let mut tally = EpochTally {
            loss_sum: vec![0.0; config.models],
            loss_n: vec![0; config.models],
            ..EpochTally::default()
        };
        let stage = if epoch <= config.init_epochs { Stage::Init } else { Stage::Relabel };
        match stage {
            Stage::Init => tr.init_epoch(epoch, &assigned, &mut tally)?,
            Stage::Relabel => tr.relabel_epoch(epoch, &union, &mut tally)?,
        }
        let metrics = eval_sets
            .iter()
            .map(|c| Ok((c.name.clone(), evaluate(&tr.models, c, vocab)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let report = EpochReport {
            epoch,
            stage,
            delta: config.delta_at(epoch),
            model_losses: tally
                .loss_sum
                .iter()
                .zip(&tally.loss_n)
                .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
                .collect(),
            filtered_frac: frac(tally.filtered, tally.visits),
            mean_weight: if tally.weight_n == 0 { 1.0 } else { tally.weight_sum / tally.weight_n as f64 },
            relabel_changed_frac: frac(tally.changed, relabelable),
            metrics,
        };
        if let Some(sel) = &config.dev_selection {
            let r = report
                .metrics
                .get(&sel.corpus)
                .ok_or_else(|| Error::Config(format!("selection corpus {} not evaluated", sel.corpus)))?;
            let score = sel.metric.of(r);
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, epoch, tr.models.clone(), tr.states.clone()));
            }
        }
        reports.push(report);
    }
    let relabeled = tr.relabeled_corpora()?;
    let (models, optimizer_states, selected_epoch) = match best {
        Some((_, e, m, s)) => (m, s, e),
        None => (tr.models, tr.states, config.total_epochs),
    };
    Ok(TrainOutcome { models, optimizer_states, reports, relabeled, selected_epoch })
}

/// Mean of per-model predictions; exposed for ensemble inference callers.
pub fn ensemble_of<T: Scalar>(preds: &[Prediction<T>]) -> Prediction<T> {
    mean_prediction(preds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_loss_example() {
        assert_eq!(select_small_loss(&[0.1_f64, 2.0, 0.3, 0.5], 0.25).unwrap(), vec![0, 2, 3]);
    }

    #[test]
    fn zero_delta_keeps_everything_in_order() {
        assert_eq!(select_small_loss(&[3.0_f64, 1.0, 2.0], 0.0).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn ties_break_by_batch_order() {
        assert_eq!(select_small_loss(&[1.0_f64, 1.0, 1.0, 1.0], 0.5).unwrap(), vec![0, 1]);
    }

    #[test]
    fn selection_rejects_bad_input() {
        assert!(select_small_loss::<f64>(&[], 0.1).is_err());
        assert!(select_small_loss(&[1.0_f64], 1.0).is_err());
        assert!(select_small_loss(&[f64::NAN], 0.1).is_err());
    }

    #[test]
    fn keep_count_snaps_float_products() {
        assert_eq!(keep_count(10, 0.3), 7);
        assert_eq!(keep_count(10, 0.1), 9);
        assert_eq!(keep_count(3, 0.5), 2);
        assert_eq!(keep_count(1, 0.4), 1);
    }

    #[test]
    fn delta_schedule_ramps_and_caps() {
        let cfg = TrainConfig { init_epochs: 3, total_epochs: 8, delta_max: 0.3, delta_ramp_epochs: 2, ..TrainConfig::default() };
        let ds: Vec<f64> = (1..=8).map(|e| cfg.delta_at(e)).collect();
        assert_eq!(&ds[..3], &[0.0, 0.0, 0.0]);
        assert!((ds[3] - 0.15).abs() < 1e-15);
        assert!(ds[4..].iter().all(|&d| d == 0.3));
        assert!(ds.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::default();
        cfg.validate().unwrap();
        cfg.init_epochs = cfg.total_epochs + 1;
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { delta_max: 1.0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { models: 3, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { update_order: vec![0, 0], ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn assignments_follow_model_count() {
        assert_eq!(default_assignment(1), vec![vec!["src", "trans", "gen"]]);
        assert_eq!(default_assignment(3)[2], vec!["src", "gen"]);
    }
}
