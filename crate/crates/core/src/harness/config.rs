use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::synth::{default_grammar, AugmentConfig, NoiseProfile, TaskGrammar};
use crate::trainer::{default_assignment, TrainConfig};

/// Named rows of the experiment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    BaselineEn,
    BaselineEnTrans,
    BaselineEnTransGen,
    DenoiseFull,
    MinusGen,
    MinusRelabel,
    MinusCotrain,
    MinusReweight,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::BaselineEn,
        Variant::BaselineEnTrans,
        Variant::BaselineEnTransGen,
        Variant::DenoiseFull,
        Variant::MinusGen,
        Variant::MinusRelabel,
        Variant::MinusCotrain,
        Variant::MinusReweight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::BaselineEn => "baseline_en",
            Variant::BaselineEnTrans => "baseline_en_trans",
            Variant::BaselineEnTransGen => "baseline_en_trans_gen",
            Variant::DenoiseFull => "denoise_full",
            Variant::MinusGen => "minus_gen",
            Variant::MinusRelabel => "minus_relabel",
            Variant::MinusCotrain => "minus_cotrain",
            Variant::MinusReweight => "minus_reweight",
        }
    }

    /// Row label used in the markdown tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::BaselineEn => "EN",
            Variant::BaselineEnTrans => "EN + Trans.",
            Variant::BaselineEnTransGen => "EN + Trans. + Gen.",
            Variant::DenoiseFull => "EN + Trans. + Gen. + Denoise",
            Variant::MinusGen => "w/o generated data",
            Variant::MinusRelabel => "w/o instance relabeling",
            Variant::MinusCotrain => "w/o co-training",
            Variant::MinusReweight => "w/o instance re-weighting",
        }
    }

    pub fn is_ablation(self) -> bool {
        matches!(self, Variant::MinusGen | Variant::MinusRelabel | Variant::MinusCotrain | Variant::MinusReweight)
    }

    /// Derives the training configuration of this variant from the base one.
    /// Baselines train every model for all epochs on its corpora with plain
    /// cross-entropy and are then ensembled.
    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        let all = |names: &[&str]| vec![names.iter().map(|s| s.to_string()).collect::<Vec<_>>(); cfg.models];
        match self {
            Variant::BaselineEn => {
                cfg.corpus_assignment = all(&["src"]);
                cfg.init_epochs = cfg.total_epochs;
            }
            Variant::BaselineEnTrans => {
                cfg.corpus_assignment = all(&["src", "trans"]);
                cfg.init_epochs = cfg.total_epochs;
            }
            Variant::BaselineEnTransGen => cfg.init_epochs = cfg.total_epochs,
            Variant::DenoiseFull => {}
            Variant::MinusGen => {
                for names in &mut cfg.corpus_assignment {
                    names.retain(|n| n != "gen");
                }
            }
            Variant::MinusRelabel => cfg.relabel = false,
            Variant::MinusCotrain => cfg.cotrain = false,
            Variant::MinusReweight => cfg.reweight = false,
        }
        cfg
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s}")))
    }
}

/// Corpus sizes and the pseudo-translation setup. The data seed is fixed
/// across run seeds so that seeds only vary training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n_src: usize,
    pub n_trans: usize,
    pub gen_copies: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub permute_window: usize,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        let a = AugmentConfig::default();
        Self {
            n_src: a.n_src,
            n_trans: a.n_trans,
            gen_copies: a.gen_copies,
            n_dev: a.n_dev,
            n_test: a.n_test,
            permute_window: 1,
            seed: 7,
        }
    }
}

impl DataConfig {
    pub fn augment(&self) -> AugmentConfig {
        AugmentConfig {
            n_src: self.n_src,
            n_trans: self.n_trans,
            gen_copies: self.gen_copies,
            n_dev: self.n_dev,
            n_test: self.n_test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Grammar JSON file; the built-in grammar when absent.
    pub grammar: Option<PathBuf>,
    pub data: DataConfig,
    pub trans_noise: NoiseProfile,
    pub gen_noise: NoiseProfile,
    pub train: TrainConfig,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grammar: None,
            data: DataConfig::default(),
            trans_noise: NoiseProfile::translation_default(),
            gen_noise: NoiseProfile::generation_default(),
            train: TrainConfig::default(),
            variants: Variant::ALL.to_vec(),
            seeds: (0..5).collect(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a JSON config; a relative grammar path is resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        if let (Some(g), Some(dir)) = (&cfg.grammar, path.parent()) {
            if g.is_relative() {
                cfg.grammar = Some(dir.join(g));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("at least one variant is required".into()));
        }
        let mut seen = self.variants.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.variants.len() {
            return Err(Error::Config("duplicate variant".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("duplicate seed".into()));
        }
        self.trans_noise.validate()?;
        self.gen_noise.validate()?;
        for v in &self.variants {
            v.apply(&self.train).validate()?;
        }
        Ok(())
    }

    pub fn grammar(&self) -> Result<TaskGrammar> {
        match &self.grammar {
            Some(p) => TaskGrammar::load(p),
            None => Ok(default_grammar()),
        }
    }

    /// Config of one cell: the variant applied to the base config with the run seed.
    pub fn cell_train_config(&self, variant: Variant, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..variant.apply(&self.train) }
    }
}

/// Parameters accepted by sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    DeltaMax,
    Models,
    GenCopies,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::DeltaMax => "delta_max",
            SweepParam::Models => "models",
            SweepParam::GenCopies => "gen_copies",
        }
    }

    /// Returns `base` with the parameter set to `value`.
    pub fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        let count = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{} takes whole numbers, got {value}", self.name())))
            }
        };
        match self {
            SweepParam::DeltaMax => cfg.train.delta_max = value,
            SweepParam::Models => {
                let k = count()?;
                cfg.train.models = k;
                cfg.train.corpus_assignment = default_assignment(k);
            }
            SweepParam::GenCopies => cfg.data.gen_copies = count()?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta_max" | "delta" => Ok(SweepParam::DeltaMax),
            "models" | "K" | "k" => Ok(SweepParam::Models),
            "gen_copies" => Ok(SweepParam::GenCopies),
            _ => Err(Error::Config(format!("unknown sweep parameter {s}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_gives_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
        assert!("denoise".parse::<Variant>().is_err());
    }

    #[test]
    fn ablations_change_one_flag() {
        let base = TrainConfig::default();
        let full = Variant::DenoiseFull.apply(&base);
        assert_eq!(Variant::MinusRelabel.apply(&base), TrainConfig { relabel: false, ..full.clone() });
        assert_eq!(Variant::MinusCotrain.apply(&base), TrainConfig { cotrain: false, ..full.clone() });
        assert_eq!(Variant::MinusReweight.apply(&base), TrainConfig { reweight: false, ..full });
    }

    #[test]
    fn baselines_skip_the_relabel_stage() {
        let base = TrainConfig::default();
        for v in [Variant::BaselineEn, Variant::BaselineEnTrans, Variant::BaselineEnTransGen] {
            let cfg = v.apply(&base);
            assert_eq!(cfg.init_epochs, cfg.total_epochs);
            cfg.validate().unwrap();
        }
        assert_eq!(Variant::BaselineEn.apply(&base).union_corpora(), vec!["src"]);
        assert!(!Variant::MinusGen.apply(&base).union_corpora().contains(&"gen".to_string()));
    }

    #[test]
    fn models_sweep_expands_assignments() {
        let base = ExperimentConfig::default();
        let cfg = SweepParam::Models.apply(&base, 3.0).unwrap();
        assert_eq!(cfg.train.corpus_assignment, default_assignment(3));
        assert!(SweepParam::Models.apply(&base, 1.5).is_err());
        assert!(SweepParam::DeltaMax.apply(&base, 1.0).is_err());
    }

    #[test]
    fn rejects_duplicates_and_empty_seeds() {
        let cfg = ExperimentConfig { seeds: vec![], ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { seeds: vec![1, 1], ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { variants: vec![Variant::DenoiseFull; 2], ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
