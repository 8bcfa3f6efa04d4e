use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataConfig, ExperimentConfig, SweepParam, Variant};
use super::report::{emit_report, emit_sweep_report, RunReport, SweepReport};
use crate::data::{load_corpus, save_corpus, Corpus, LabelSchema, Source};
use crate::encoder::ModelParams;
use crate::error::{io_err, Error, Result};
use crate::metrics::{evaluate, relabel_diagnostics, EvalResult, RelabelDiagnostics};
use crate::synth::{build_augmented_corpora, AugmentedCorpora, NoiseProfile, PseudoTranslator};
use crate::trainer::{train_denoise, EpochReport, TrainConfig};
use crate::vocab::Vocabulary;

pub const MANIFEST_FORMAT: &str = "slu-denoise/experiment";
pub const SWEEP_FORMAT: &str = "slu-denoise/sweep";

/// Execution knobs that never change results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for independent cells; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Write generated corpora, checkpoints and relabeled corpora.
    pub save_artifacts: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { threads: None, save_artifacts: true }
    }
}

/// Generated corpora plus the shared vocabulary.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub corpora: AugmentedCorpora,
    pub vocab: Vocabulary,
}

impl PreparedData {
    pub fn training(&self) -> [&Corpus; 3] {
        [&self.corpora.src, &self.corpora.trans, &self.corpora.gen]
    }
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let grammar = cfg.grammar()?;
    let translator = PseudoTranslator::for_vocabulary(&grammar.vocabulary(), cfg.data.permute_window, cfg.data.seed);
    let corpora = build_augmented_corpora(
        &grammar,
        &translator,
        &cfg.trans_noise,
        &cfg.gen_noise,
        &cfg.data.augment(),
        cfg.data.seed,
    )?;
    let vocab = Vocabulary::from_corpora([&corpora.src, &corpora.trans, &corpora.gen]);
    Ok(PreparedData { corpora, vocab })
}

const DATA_FILES: [&str; 6] = ["src", "trans", "gen", "dev", "target_dev", "test"];

/// Writes `schema.json`, `vocab.json` and one JSONL file per corpus.
pub fn write_data(data: &PreparedData, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    data.corpora.schema.save(&dir.join("schema.json"))?;
    data.vocab.save(&dir.join("vocab.json"))?;
    for c in data.corpora.all() {
        save_corpus(c, &dir.join(format!("{}.jsonl", c.name)))?;
    }
    Ok(())
}

pub fn read_data(dir: &Path) -> Result<PreparedData> {
    let schema = LabelSchema::load(&dir.join("schema.json"))?;
    let vocab = Vocabulary::load(&dir.join("vocab.json"))?;
    let mut cs = DATA_FILES
        .iter()
        .map(|n| load_corpus(&dir.join(format!("{n}.jsonl")), &schema))
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    let mut next = || cs.next().expect("six corpora");
    let corpora = AugmentedCorpora {
        src: next(),
        trans: next(),
        gen: next(),
        dev: next(),
        target_dev: next(),
        test: next(),
        schema,
    };
    Ok(PreparedData { corpora, vocab })
}

/// Everything a cell's outcome depends on besides the data seed's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellManifest {
    pub format: String,
    pub grammar: String,
    pub data: DataConfig,
    pub trans_noise: NoiseProfile,
    pub gen_noise: NoiseProfile,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub variant: Variant,
    pub seed: u64,
    pub status: CellStatus,
    pub error: Option<String>,
    pub epochs: usize,
    pub selected_epoch: Option<usize>,
    pub test: Option<EvalResult>,
    pub target_dev: Option<EvalResult>,
    pub diagnostics: Option<RelabelDiagnostics>,
}

impl CellResult {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

/// One line of `epochs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLine {
    pub variant: Variant,
    pub seed: u64,
    #[serde(flatten)]
    pub report: EpochReport,
}

pub fn cell_dir(run_dir: &Path, variant: Variant, seed: u64) -> PathBuf {
    run_dir.join("cells").join(variant.name()).join(format!("seed-{seed}"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(io_err(path))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

fn grammar_source(cfg: &ExperimentConfig) -> String {
    cfg.grammar.as_ref().map_or_else(|| "builtin".to_string(), |p| p.display().to_string())
}

/// Diagnostics over all relabelable corpora merged into one.
fn merged_diagnostics(relabeled: &[Corpus], originals: &[&Corpus], exempt: &[Source]) -> Result<RelabelDiagnostics> {
    let schema = originals[0].schema.clone();
    let mut before = Vec::new();
    let mut after = Vec::new();
    for c in relabeled {
        let orig = originals
            .iter()
            .find(|o| o.name == c.name)
            .ok_or_else(|| Error::Config(format!("relabeled corpus {} has no original", c.name)))?;
        let keep = |i: &&crate::data::Instance| !exempt.contains(&i.source);
        before.extend(orig.instances.iter().filter(keep).cloned());
        after.extend(c.instances.iter().filter(keep).cloned());
    }
    let before = Corpus::new("augmented", schema.clone(), before)?;
    let after = Corpus::new("augmented", schema, after)?;
    relabel_diagnostics(&after, &before)
}

/// Trains and evaluates one (variant, seed) cell, writing its logs under `dir`.
pub fn run_cell(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    variant: Variant,
    seed: u64,
    dir: &Path,
    save_artifacts: bool,
) -> Result<CellResult> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let train = cfg.cell_train_config(variant, seed);
    let manifest = CellManifest {
        format: "slu-denoise/cell".into(),
        grammar: grammar_source(cfg),
        data: cfg.data.clone(),
        trans_noise: cfg.trans_noise,
        gen_noise: cfg.gen_noise,
        train: train.clone(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    let outcome = train_cell(data, &train, variant, seed, dir, save_artifacts);
    let result = match outcome {
        Ok(r) => r,
        Err(e) => CellResult {
            variant,
            seed,
            status: CellStatus::Error,
            error: Some(e.to_string()),
            epochs: 0,
            selected_epoch: None,
            test: None,
            target_dev: None,
            diagnostics: None,
        },
    };
    write_json(&dir.join("result.json"), &result)?;
    Ok(result)
}

fn train_cell(
    data: &PreparedData,
    train: &TrainConfig,
    variant: Variant,
    seed: u64,
    dir: &Path,
    save_artifacts: bool,
) -> Result<CellResult> {
    let c = &data.corpora;
    let mut eval_sets = vec![&c.test, &c.target_dev];
    if let Some(sel) = &train.dev_selection {
        if sel.corpus == "dev" {
            eval_sets.push(&c.dev);
        }
    }
    let log_path = dir.join("epochs.jsonl");
    let outcome = train_denoise::<f64>(&data.training(), &data.vocab, train, &eval_sets)?;
    let mut log = String::new();
    for report in &outcome.reports {
        let line = EpochLine { variant, seed, report: report.clone() };
        log.push_str(&serde_json::to_string(&line)?);
        log.push('\n');
    }
    fs::write(&log_path, log).map_err(io_err(&log_path))?;

    let test = evaluate(&outcome.models, &c.test, &data.vocab)?;
    let target_dev = evaluate(&outcome.models, &c.target_dev, &data.vocab)?;
    let diagnostics = merged_diagnostics(&outcome.relabeled, &data.training(), &train.relabel_exempt)?;

    if save_artifacts {
        let ck = dir.join("checkpoints");
        fs::create_dir_all(&ck).map_err(io_err(&ck))?;
        data.vocab.save(&ck.join("vocab.json"))?;
        c.schema.save(&ck.join("schema.json"))?;
        for (k, (m, s)) in outcome.models.iter().zip(&outcome.optimizer_states).enumerate() {
            m.save(&ck.join(format!("model-{k}.json")))?;
            s.save(&ck.join(format!("optimizer-{k}.json")))?;
        }
        let rl = dir.join("relabeled");
        fs::create_dir_all(&rl).map_err(io_err(&rl))?;
        for corpus in &outcome.relabeled {
            save_corpus(corpus, &rl.join(format!("{}.jsonl", corpus.name)))?;
        }
    }
    Ok(CellResult {
        variant,
        seed,
        status: CellStatus::Ok,
        error: None,
        epochs: outcome.reports.len(),
        selected_epoch: train.dev_selection.as_ref().map(|_| outcome.selected_epoch),
        test: Some(test),
        target_dev: Some(target_dev),
        diagnostics: Some(diagnostics),
    })
}

fn with_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs every (variant, seed) cell of `cfg` under `out` and emits the report.
/// A failing cell is recorded in its `result.json`; the other cells continue.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, opts: RunOptions) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_json(&out.join("manifest.json"), &ExperimentManifest { format: MANIFEST_FORMAT.into(), config: cfg.clone() })?;
    let data = prepare_data(cfg)?;
    if opts.save_artifacts {
        write_data(&data, &out.join("data"))?;
    }
    let cells: Vec<(Variant, u64)> =
        cfg.variants.iter().flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s))).collect();
    let results = with_pool(opts.threads, || {
        cells
            .par_iter()
            .map(|&(v, s)| run_cell(cfg, &data, v, s, &cell_dir(out, v, s), opts.save_artifacts))
            .collect::<Vec<_>>()
    })?;
    results.into_iter().collect::<Result<Vec<_>>>()?;
    emit_report(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub format: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub format: String,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub config: ExperimentConfig,
}

pub fn sweep_point_dir(out: &Path, param: SweepParam, value: f64) -> PathBuf {
    out.join(format!("{}-{value}", param.name()))
}

/// One experiment per value, each in its own subdirectory, plus sweep tables.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    out: &Path,
    opts: RunOptions,
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs = values.iter().map(|&v| param.apply(cfg, v)).collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_json(
        &out.join("manifest.json"),
        &SweepManifest { format: SWEEP_FORMAT.into(), param, values: values.to_vec(), config: cfg.clone() },
    )?;
    for (c, &v) in configs.iter().zip(values) {
        run_experiment(c, &sweep_point_dir(out, param, v), opts)?;
    }
    emit_sweep_report(out)
}

/// Loads `model-*.json` and the vocabulary from a checkpoint directory and
/// scores the ensemble on a JSONL corpus. The schema is taken from the
/// checkpoint directory, or from `schema.json` next to the corpus.
pub fn evaluate_checkpoints(models_dir: &Path, test: &Path) -> Result<EvalResult> {
    let vocab = Vocabulary::load(&models_dir.join("vocab.json"))?;
    let schema_path = [models_dir.join("schema.json"), test.with_file_name("schema.json")]
        .into_iter()
        .find(|p| p.exists())
        .ok_or_else(|| Error::Config(format!("no schema.json in {}", models_dir.display())))?;
    let schema = LabelSchema::load(&schema_path)?;
    let corpus = load_corpus(test, &schema)?;
    let mut models = Vec::new();
    for k in 0.. {
        let p = models_dir.join(format!("model-{k}.json"));
        if !p.exists() {
            break;
        }
        models.push(ModelParams::<f64>::load(&p)?);
    }
    if models.is_empty() {
        return Err(Error::Config(format!("no model-0.json in {}", models_dir.display())));
    }
    evaluate(&models, &corpus, &vocab)
}

/// Concatenates text files, each expected to end in a newline.
pub(crate) fn concat_files(paths: &[PathBuf], out: &Path) -> Result<()> {
    let mut f = fs::File::create(out).map_err(io_err(out))?;
    for p in paths {
        let text = fs::read(p).map_err(io_err(p))?;
        f.write_all(&text).map_err(io_err(out))?;
    }
    Ok(())
}
