//! Synthetic SLU task: a template grammar, a pseudo-translated target
//! language with exactly projected labels, and label-noise injectors that
//! stand in for translation/alignment and generation errors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{BioTag, CleanLabels, Corpus, Instance, IntentLabel, LabelSchema, SlotLabels, Source};
use crate::error::{io_err, Error, Result};
use crate::metrics::{extract_spans, spans_of, Span};
use crate::rng::{rng_for, stream, Rng};

/// Pattern token replaced by one random carrier word.
pub const CARRIER_PLACEHOLDER: &str = "*";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub intent: String,
    /// Literal tokens, `{slot_type}` placeholders and `*` carrier slots.
    pub pattern: Vec<String>,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGrammar {
    pub templates: Vec<Template>,
    pub slot_lexicons: BTreeMap<String, Vec<Vec<String>>>,
    pub carrier_vocab: Vec<String>,
}

enum PatternItem<'a> {
    Word(&'a str),
    Slot(&'a str),
    Carrier,
}

fn parse_item(tok: &str) -> PatternItem<'_> {
    if tok == CARRIER_PLACEHOLDER {
        PatternItem::Carrier
    } else if let Some(inner) = tok.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
        PatternItem::Slot(inner)
    } else {
        PatternItem::Word(tok)
    }
}

impl TaskGrammar {
    pub fn load(path: &Path) -> Result<Self> {
        let g: Self = serde_json::from_str(&fs::read_to_string(path).map_err(io_err(path))?)?;
        g.validate()?;
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(io_err(path))
    }

    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::Config("grammar has no templates".into()));
        }
        for t in &self.templates {
            if t.pattern.is_empty() || !(t.weight > 0.0) {
                return Err(Error::Config(format!("template for {} is empty or has no weight", t.intent)));
            }
            for tok in &t.pattern {
                match parse_item(tok) {
                    PatternItem::Slot(s) => match self.slot_lexicons.get(s) {
                        Some(values) if !values.is_empty() && values.iter().all(|v| !v.is_empty()) => {}
                        _ => return Err(Error::Config(format!("slot type {s} has no lexicon"))),
                    },
                    PatternItem::Carrier if self.carrier_vocab.is_empty() => {
                        return Err(Error::Config("carrier placeholder without carrier vocabulary".into()))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Intents in order of first template appearance; slot types in name order.
    pub fn schema(&self) -> Result<LabelSchema> {
        let mut intents: Vec<String> = Vec::new();
        for t in &self.templates {
            if !intents.contains(&t.intent) {
                intents.push(t.intent.clone());
            }
        }
        LabelSchema::new(intents, self.slot_lexicons.keys().cloned().collect())
    }

    /// Every token the grammar can emit, sorted.
    /// Appends `per_type` made-up values to every slot lexicon, alternating
    /// one- and two-word values. Rare values make memorized label noise
    /// costly at test time.
    pub fn with_long_tail(mut self, per_type: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, &[stream::LEXICON, 1]);
        let mut used: BTreeSet<String> = self.vocabulary().into_iter().collect();
        let mut fresh = || loop {
            let n = rng.gen_range(2..=3);
            let w: String = (0..n)
                .map(|_| format!("{}{}", ONSETS.choose(&mut rng).expect("non-empty"), NUCLEI.choose(&mut rng).expect("non-empty")))
                .collect();
            if used.insert(w.clone()) {
                break w;
            }
        };
        for values in self.slot_lexicons.values_mut() {
            for j in 0..per_type {
                values.push((0..1 + j % 2).map(|_| fresh()).collect());
            }
        }
        self
    }

    pub fn vocabulary(&self) -> Vec<String> {
        let mut v = BTreeSet::new();
        for t in &self.templates {
            for tok in &t.pattern {
                if let PatternItem::Word(w) = parse_item(tok) {
                    v.insert(w.to_string());
                }
            }
        }
        v.extend(self.slot_lexicons.values().flatten().flatten().cloned());
        v.extend(self.carrier_vocab.iter().cloned());
        v.into_iter().collect()
    }

    /// Probability of each intent under the template mixture.
    pub fn intent_mixture(&self) -> BTreeMap<String, f64> {
        let total: f64 = self.templates.iter().map(|t| t.weight).sum();
        let mut m = BTreeMap::new();
        for t in &self.templates {
            *m.entry(t.intent.clone()).or_insert(0.0) += t.weight / total;
        }
        m
    }

    fn sample_template<'a>(&'a self, rng: &mut Rng, intent: Option<&str>) -> &'a Template {
        let pool: Vec<&Template> =
            self.templates.iter().filter(|t| intent.is_none_or(|i| t.intent == i)).collect();
        pool.choose_weighted(rng, |t| t.weight).copied().unwrap_or(&self.templates[0])
    }

    fn realize(&self, template: &Template, schema: &LabelSchema, rng: &mut Rng, id: String) -> Instance {
        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        for tok in &template.pattern {
            match parse_item(tok) {
                PatternItem::Word(w) => {
                    tokens.push(w.to_string());
                    tags.push(0);
                }
                PatternItem::Carrier => {
                    tokens.push(self.carrier_vocab.choose(rng).cloned().unwrap_or_default());
                    tags.push(0);
                }
                PatternItem::Slot(s) => {
                    let t = schema.slot_type_id(s).expect("validated slot type");
                    let value = self.slot_lexicons[s].choose(rng).expect("validated lexicon");
                    for (k, w) in value.iter().enumerate() {
                        tokens.push(w.clone());
                        let tag = if k == 0 { BioTag::Begin(t) } else { BioTag::Inside(t) };
                        tags.push(schema.tag_to_id(tag));
                    }
                }
            }
        }
        let intent = schema.intent_id(&template.intent).expect("intent from grammar");
        Instance::hard(id, tokens, intent, tags, Source::Src)
    }

    /// Samples one clean source-language utterance, optionally of a fixed intent.
    pub fn sample(
        &self,
        schema: &LabelSchema,
        rng: &mut Rng,
        id: String,
        intent: Option<&str>,
    ) -> Instance {
        let t = self.sample_template(rng, intent);
        self.realize(t, schema, rng, id)
    }
}

/// Bijective token lexicon into a synthetic target language, plus a local
/// reordering radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoTranslator {
    pub lexicon: BTreeMap<String, String>,
    pub permute_window: usize,
}

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "dr"];
const NUCLEI: [&str; 8] = ["a", "e", "i", "o", "u", "ai", "ou", "ei"];

impl PseudoTranslator {
    /// Maps every token to a distinct synthetic word built from seeded syllables.
    pub fn for_vocabulary(vocab: &[String], permute_window: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, &[stream::LEXICON]);
        let mut used = BTreeSet::new();
        let mut lexicon = BTreeMap::new();
        for tok in vocab {
            let syllables = 2 + tok.len() / 5;
            let word = loop {
                let mut w = String::new();
                for _ in 0..syllables {
                    w.push_str(ONSETS.choose(&mut rng).expect("non-empty"));
                    w.push_str(NUCLEI.choose(&mut rng).expect("non-empty"));
                }
                // source tokens never collide with target words
                if !used.contains(&w) && !vocab.contains(&w) {
                    break w;
                }
            };
            used.insert(word.clone());
            lexicon.insert(tok.clone(), word);
        }
        Self { lexicon, permute_window }
    }

    pub fn is_bijective(&self) -> bool {
        self.lexicon.values().collect::<BTreeSet<_>>().len() == self.lexicon.len()
    }

    pub fn inverse(&self) -> Self {
        Self {
            lexicon: self.lexicon.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
            permute_window: self.permute_window,
        }
    }

    pub fn target_vocabulary(&self) -> Vec<String> {
        self.lexicon.values().cloned().collect()
    }

    pub fn map_token(&self, tok: &str) -> Result<String> {
        self.lexicon.get(tok).cloned().ok_or_else(|| Error::UnknownToken(tok.to_string()))
    }
}

/// Reorders whole spans and single `O` tokens with displacement at most
/// `window` units. Returns token positions in output order.
fn local_permutation(tags: &[usize], window: usize, rng: &mut Rng) -> Vec<usize> {
    let spans = spans_of(tags);
    let mut units: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        match spans.iter().find(|s| s.start == i) {
            Some(s) => {
                units.push((s.start, s.end));
                i = s.end + 1;
            }
            None => {
                units.push((i, i));
                i += 1;
            }
        }
    }
    let mut keyed: Vec<(f64, usize)> = units
        .iter()
        .enumerate()
        .map(|(u, _)| (u as f64 + rng.gen_range(0.0..(window as f64 + 1.0)), u))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.iter().flat_map(|&(_, u)| units[u].0..=units[u].1).collect()
}

fn permute<T: Clone>(xs: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&i| xs[i].clone()).collect()
}

/// Maps tokens through the lexicon and locally reorders spans, moving
/// every label (and any clean label) with its token.
pub fn pseudo_translate(inst: &Instance, translator: &PseudoTranslator, seed: u64) -> Result<Instance> {
    let tokens = inst
        .tokens
        .iter()
        .map(|t| translator.map_token(t))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Instance { tokens, ..inst.clone() };
    if translator.permute_window == 0 {
        return Ok(out);
    }
    let tags = inst.argmax_labels().1;
    let mut rng = rng_for(seed, &[stream::TRANSLATE]);
    let order = local_permutation(&tags, translator.permute_window, &mut rng);
    out.tokens = permute(&out.tokens, &order);
    out.slots = match &inst.slots {
        SlotLabels::Hard(t) => SlotLabels::Hard(permute(t, &order)),
        SlotLabels::Soft(d) => SlotLabels::Soft(permute(d, &order)),
    };
    out.clean = inst
        .clean
        .as_ref()
        .map(|c| CleanLabels { intent: c.intent, slots: permute(&c.slots, &order) });
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub p_intent_flip: f64,
    pub p_slot_type_flip: f64,
    pub p_boundary_shift: f64,
    pub p_token_substitute: f64,
    #[serde(default)]
    pub p_token_drop: f64,
}

impl NoiseProfile {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Translation/alignment-style noise.
    pub fn translation_default() -> Self {
        Self {
            p_intent_flip: 0.0,
            p_slot_type_flip: 0.10,
            p_boundary_shift: 0.15,
            p_token_substitute: 0.05,
            p_token_drop: 0.0,
        }
    }

    /// Generation-style noise.
    pub fn generation_default() -> Self {
        Self {
            p_intent_flip: 0.10,
            p_slot_type_flip: 0.25,
            p_boundary_shift: 0.25,
            p_token_substitute: 0.15,
            p_token_drop: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ps = [
            self.p_intent_flip,
            self.p_slot_type_flip,
            self.p_boundary_shift,
            self.p_token_substitute,
            self.p_token_drop,
        ];
        if ps.iter().all(|p| (0.0..=1.0).contains(p)) {
            Ok(())
        } else {
            Err(Error::Config(format!("noise probabilities must lie in [0, 1]: {self:?}")))
        }
    }
}

/// Corrupts hard labels and tokens; the pre-corruption labels are kept in
/// `clean` (aligned to surviving tokens when tokens are dropped).
///
/// Operators run in order: token drop, token substitution from
/// `substitute_vocab`, intent flip, per-span type flip, per-span boundary
/// shift. Boundary shifts that would orphan an `I-` tag or empty a span are
/// skipped.
pub fn inject_noise(
    inst: &Instance,
    profile: &NoiseProfile,
    schema: &LabelSchema,
    substitute_vocab: &[String],
    seed: u64,
) -> Result<Instance> {
    profile.validate()?;
    let (intent, slots) = inst
        .hard_labels()
        .ok_or_else(|| Error::InvalidArgument(format!("instance {} has soft labels", inst.id)))?;
    let mut rng = rng_for(seed, &[stream::NOISE]);
    let mut tokens = inst.tokens.clone();
    let mut tags = slots.to_vec();
    let mut clean = inst.clean.clone().unwrap_or(CleanLabels { intent, slots: slots.to_vec() });

    if profile.p_token_drop > 0.0 {
        let keep: Vec<bool> = (0..tokens.len()).map(|_| !rng.gen_bool(profile.p_token_drop)).collect();
        if keep.iter().any(|&k| k) {
            let filter = |xs: &[usize]| repair_bio(
                &xs.iter().zip(&keep).filter(|(_, &k)| k).map(|(&x, _)| x).collect::<Vec<_>>(),
                schema,
            );
            tags = filter(&tags);
            clean.slots = filter(&clean.slots);
            tokens = tokens.into_iter().zip(&keep).filter(|(_, &k)| k).map(|(t, _)| t).collect();
        }
    }
    if profile.p_token_substitute > 0.0 && !substitute_vocab.is_empty() {
        for tok in tokens.iter_mut() {
            if rng.gen_bool(profile.p_token_substitute) {
                *tok = substitute_vocab.choose(&mut rng).expect("non-empty").clone();
            }
        }
    }
    let mut new_intent = intent;
    if schema.n_intents() >= 2 && rng.gen_bool(profile.p_intent_flip) {
        let k = rng.gen_range(0..schema.n_intents() - 1);
        new_intent = if k >= intent { k + 1 } else { k };
    }
    let n_types = schema.slot_types().len();
    if n_types >= 2 && profile.p_slot_type_flip > 0.0 {
        for span in extract_spans(&tags, schema) {
            if rng.gen_bool(profile.p_slot_type_flip) {
                let k = rng.gen_range(0..n_types - 1);
                let t = if k >= span.slot_type { k + 1 } else { k };
                set_span(&mut tags, &Span { slot_type: t, ..span }, schema);
            }
        }
    }
    if profile.p_boundary_shift > 0.0 {
        for span in extract_spans(&tags, schema) {
            if rng.gen_bool(profile.p_boundary_shift) {
                if rng.gen_bool(0.5) {
                    // extend right onto an O token
                    if span.end + 1 < tags.len() && tags[span.end + 1] == 0 {
                        tags[span.end + 1] = schema.tag_to_id(BioTag::Inside(span.slot_type));
                    }
                } else if span.end > span.start {
                    tags[span.end] = 0;
                }
            }
        }
    }
    Ok(Instance {
        id: inst.id.clone(),
        tokens,
        intent: IntentLabel::Hard(new_intent),
        slots: SlotLabels::Hard(tags),
        source: inst.source,
        clean: Some(clean),
    })
}

fn set_span(tags: &mut [usize], span: &Span, schema: &LabelSchema) {
    tags[span.start] = schema.tag_to_id(BioTag::Begin(span.slot_type));
    for t in &mut tags[span.start + 1..=span.end] {
        *t = schema.tag_to_id(BioTag::Inside(span.slot_type));
    }
}

/// Turns orphan `I-t` tags into `B-t`.
fn repair_bio(tags: &[usize], schema: &LabelSchema) -> Vec<usize> {
    let mut out = tags.to_vec();
    let mut prev = BioTag::Outside;
    for t in out.iter_mut() {
        if let BioTag::Inside(ty) = schema.tag(*t) {
            if prev.slot_type() != Some(ty) {
                *t = schema.tag_to_id(BioTag::Begin(ty));
            }
        }
        prev = schema.tag(*t);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleanSizes {
    pub train: usize,
    pub dev: usize,
    pub target_train: usize,
    pub test: usize,
}

/// Clean splits: source-language train/dev, and pseudo-translated target
/// train/dev/test drawn from held-out utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanSplits {
    pub schema: LabelSchema,
    pub src: Corpus,
    pub dev: Corpus,
    /// Clean source-language utterances behind `target_train`.
    pub target_source: Vec<Instance>,
    pub target_train: Corpus,
    pub target_dev: Corpus,
    pub test: Corpus,
}

mod split {
    pub const SRC: u64 = 0;
    pub const DEV: u64 = 1;
    pub const TARGET_TRAIN: u64 = 2;
    pub const TARGET_DEV: u64 = 3;
    pub const TEST: u64 = 4;
    pub const GEN: u64 = 5;
}

fn sample_split(grammar: &TaskGrammar, schema: &LabelSchema, n: usize, seed: u64, split: u64, prefix: &str) -> Vec<Instance> {
    (0..n)
        .map(|i| {
            let mut rng = rng_for(seed, &[stream::GENERATE, split, i as u64]);
            grammar.sample(schema, &mut rng, format!("{prefix}-{i:06}"), None)
        })
        .collect()
}

fn translate_all(insts: &[Instance], t: &PseudoTranslator, seed: u64, split: u64) -> Result<Vec<Instance>> {
    insts
        .iter()
        .enumerate()
        .map(|(i, inst)| pseudo_translate(inst, t, crate::rng::derive_seed(seed, &[split, i as u64])))
        .collect()
}

pub fn generate_clean_dataset(
    grammar: &TaskGrammar,
    translator: &PseudoTranslator,
    sizes: CleanSizes,
    seed: u64,
) -> Result<CleanSplits> {
    grammar.validate()?;
    if sizes.train == 0 || sizes.dev == 0 || sizes.target_train == 0 || sizes.test == 0 {
        return Err(Error::Config("split sizes must be at least 1".into()));
    }
    let schema = grammar.schema()?;
    let src = sample_split(grammar, &schema, sizes.train, seed, split::SRC, "src");
    let dev = sample_split(grammar, &schema, sizes.dev, seed, split::DEV, "dev");
    let target_source = sample_split(grammar, &schema, sizes.target_train, seed, split::TARGET_TRAIN, "tgt");
    let tdev = sample_split(grammar, &schema, sizes.dev, seed, split::TARGET_DEV, "tdev");
    let test = sample_split(grammar, &schema, sizes.test, seed, split::TEST, "test");
    let target_train = translate_all(&target_source, translator, seed, split::TARGET_TRAIN)?;
    let target_dev = translate_all(&tdev, translator, seed, split::TARGET_DEV)?;
    let test = translate_all(&test, translator, seed, split::TEST)?;
    Ok(CleanSplits {
        src: Corpus::new("src", schema.clone(), src)?,
        dev: Corpus::new("dev", schema.clone(), dev)?,
        target_train: Corpus::new("target_train", schema.clone(), target_train)?,
        target_dev: Corpus::new("target_dev", schema.clone(), target_dev)?,
        test: Corpus::new("test", schema.clone(), test)?,
        target_source,
        schema,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub n_src: usize,
    pub n_trans: usize,
    /// Generated variants per clean target utterance.
    pub gen_copies: usize,
    pub n_dev: usize,
    pub n_test: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { n_src: 2000, n_trans: 2000, gen_copies: 1, n_dev: 500, n_test: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedCorpora {
    pub schema: LabelSchema,
    pub src: Corpus,
    pub trans: Corpus,
    pub gen: Corpus,
    pub dev: Corpus,
    pub target_dev: Corpus,
    pub test: Corpus,
}

impl AugmentedCorpora {
    pub fn by_name(&self, name: &str) -> Option<&Corpus> {
        self.all().into_iter().find(|c| c.name == name)
    }

    pub fn all(&self) -> [&Corpus; 6] {
        [&self.src, &self.trans, &self.gen, &self.dev, &self.target_dev, &self.test]
    }

    pub fn training(&self) -> HashMap<String, &Corpus> {
        [&self.src, &self.trans, &self.gen].into_iter().map(|c| (c.name.clone(), c)).collect()
    }
}

/// Builds the source, translated and generated training corpora plus the
/// clean dev and test sets. Test data is never passed through noise.
pub fn build_augmented_corpora(
    grammar: &TaskGrammar,
    translator: &PseudoTranslator,
    trans_profile: &NoiseProfile,
    gen_profile: &NoiseProfile,
    config: &AugmentConfig,
    seed: u64,
) -> Result<AugmentedCorpora> {
    trans_profile.validate()?;
    gen_profile.validate()?;
    if gen_profile.p_intent_flip <= trans_profile.p_intent_flip {
        return Err(Error::Config(
            "generation noise must flip intents more often than translation noise".into(),
        ));
    }
    let clean = generate_clean_dataset(
        grammar,
        translator,
        CleanSizes { train: config.n_src, dev: config.n_dev, target_train: config.n_trans, test: config.n_test },
        seed,
    )?;
    let schema = clean.schema.clone();
    let target_vocab = translator.target_vocabulary();

    let trans = clean
        .target_train
        .instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let inst = Instance { id: format!("trans-{i:06}"), source: Source::Trans, ..inst.clone() };
            inject_noise(&inst, trans_profile, &schema, &target_vocab, crate::rng::derive_seed(seed, &[split::TARGET_TRAIN, i as u64]))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut gen = Vec::with_capacity(config.n_trans * config.gen_copies);
    for (i, base) in clean.target_source.iter().enumerate() {
        let intent = &schema.intents()[base.hard_labels().expect("clean").0];
        for c in 0..config.gen_copies {
            let s = crate::rng::derive_seed(seed, &[split::GEN, i as u64, c as u64]);
            let mut rng = rng_for(s, &[stream::GENERATE]);
            let fresh = grammar.sample(&schema, &mut rng, format!("gen-{i:06}-{c}"), Some(intent));
            let translated = pseudo_translate(&fresh, translator, s)?;
            let inst = Instance { source: Source::Gen, ..translated };
            gen.push(inject_noise(&inst, gen_profile, &schema, &target_vocab, s)?);
        }
    }
    let src = Corpus::new(
        "src",
        schema.clone(),
        clean
            .src
            .instances
            .into_iter()
            .map(|i| {
                let (intent, slots) = i.hard_labels().map(|(a, b)| (a, b.to_vec())).expect("clean");
                Instance { clean: Some(CleanLabels { intent, slots }), ..i }
            })
            .collect(),
    )?;
    Ok(AugmentedCorpora {
        src,
        trans: Corpus::new("trans", schema.clone(), trans)?,
        gen: Corpus::new("gen", schema.clone(), gen)?,
        dev: clean.dev,
        target_dev: clean.target_dev,
        test: clean.test,
        schema,
    })
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn lexicon(values: &[&str]) -> Vec<Vec<String>> {
    values.iter().map(|v| words(v)).collect()
}

/// Built-in grammar: 8 intents, 6 slot types, 40 templates.
pub fn default_grammar() -> TaskGrammar {
    let t = |intent: &str, pattern: &str| Template { intent: intent.into(), pattern: words(pattern), weight: 1.0 };
    let templates = vec![
        t("book_flight", "book a flight from {city} to {city} {date}"),
        t("book_flight", "i need a flight to {city} on {date}"),
        t("book_flight", "* fly me from {city} to {city} at {time}"),
        t("book_flight", "find flights to {city} leaving {date}"),
        t("book_flight", "get me a plane ticket to {city} *"),
        t("get_weather", "what is the weather in {city} {date}"),
        t("get_weather", "will it rain in {city} on {date}"),
        t("get_weather", "* forecast for {city} at {time}"),
        t("get_weather", "how cold is it in {city}"),
        t("get_weather", "is it sunny {date} *"),
        t("play_music", "play {song} by {artist}"),
        t("play_music", "* put on some {genre} music"),
        t("play_music", "i want to hear {artist}"),
        t("play_music", "play some {genre} by {artist} *"),
        t("play_music", "start the song {song}"),
        t("set_alarm", "set an alarm for {time} {date}"),
        t("set_alarm", "wake me up at {time}"),
        t("set_alarm", "* alarm at {time} on {date}"),
        t("set_alarm", "remind me {date} at {time} to leave"),
        t("set_alarm", "set a timer until {time} *"),
        t("find_restaurant", "find a {cuisine} restaurant in {city}"),
        t("find_restaurant", "* where can i eat {cuisine} food"),
        t("find_restaurant", "book a table for {cuisine} at {time}"),
        t("find_restaurant", "show me {cuisine} places near {city} {date}"),
        t("find_restaurant", "i am hungry for {cuisine} *"),
        t("book_hotel", "book a hotel in {city} for {date}"),
        t("book_hotel", "i need a room in {city} *"),
        t("book_hotel", "reserve a hotel near {city} from {date}"),
        t("book_hotel", "* find lodging in {city} on {date}"),
        t("book_hotel", "get me a suite in {city} at {time}"),
        t("add_to_playlist", "add {song} to my playlist"),
        t("add_to_playlist", "put {song} by {artist} on my list"),
        t("add_to_playlist", "* save this {genre} track to my playlist"),
        t("add_to_playlist", "include {artist} in my workout playlist"),
        t("add_to_playlist", "add some {genre} to my playlist *"),
        t("get_directions", "how do i get to {city} from {city}"),
        t("get_directions", "directions to {city} *"),
        t("get_directions", "navigate to {city} leaving at {time}"),
        t("get_directions", "* show me the route to {city} {date}"),
        t("get_directions", "what is the fastest way to {city}"),
    ];
    let mut slot_lexicons = BTreeMap::new();
    slot_lexicons.insert(
        "city".to_string(),
        lexicon(&[
            "boston", "chicago", "denver", "seattle", "austin", "miami", "atlanta", "dallas",
            "houston", "phoenix", "portland", "detroit", "memphis", "nashville", "orlando",
            "tampa", "raleigh", "omaha", "tulsa", "reno", "new york", "san francisco",
            "los angeles", "las vegas", "san diego", "salt lake city", "kansas city",
            "new orleans", "st louis", "el paso", "fort worth", "santa fe", "long beach",
            "baton rouge", "little rock", "des moines", "green bay", "ann arbor",
            "palm springs", "grand rapids",
        ]),
    );
    slot_lexicons.insert(
        "date".to_string(),
        lexicon(&[
            "today", "tomorrow", "monday", "tuesday", "wednesday", "thursday", "friday",
            "saturday", "sunday", "next week", "this weekend", "next monday", "next friday",
            "the day after tomorrow", "march first", "april tenth", "june third",
            "july fourth", "new years eve", "christmas day", "this evening", "tomorrow morning",
        ]),
    );
    slot_lexicons.insert(
        "time".to_string(),
        lexicon(&[
            "noon", "midnight", "seven am", "eight am", "nine thirty", "ten pm", "six pm",
            "half past five", "quarter to nine", "five oclock", "eleven fifteen", "two pm",
            "four thirty pm", "dawn", "sunrise", "sunset", "three am", "one in the afternoon",
        ]),
    );
    slot_lexicons.insert(
        "artist".to_string(),
        lexicon(&[
            "adele", "drake", "madonna", "prince", "rihanna", "shakira", "beyonce", "eminem",
            "the beatles", "pink floyd", "led zeppelin", "taylor swift", "miles davis",
            "john coltrane", "bob dylan", "daft punk", "norah jones", "ray charles",
            "elton john", "bruno mars", "the rolling stones", "frank sinatra", "nina simone",
            "billie eilish", "kendrick lamar", "johnny cash",
        ]),
    );
    slot_lexicons.insert(
        "song".to_string(),
        lexicon(&[
            "yesterday", "hello", "imagine", "thriller", "hurt", "halo", "umbrella", "jolene",
            "respect", "bad guy", "let it be", "hey jude", "purple rain", "blue in green",
            "so what", "take five", "hotel california", "wonderwall", "rolling in the deep",
            "shake it off", "lose yourself", "fly me to the moon", "smells like teen spirit",
            "dancing queen", "superstition",
        ]),
    );
    slot_lexicons.insert(
        "genre".to_string(),
        lexicon(&[
            "jazz", "rock", "blues", "country", "hip hop", "classical", "reggae", "techno",
            "folk", "soul", "heavy metal", "bossa nova", "indie pop", "punk", "gospel",
        ]),
    );
    slot_lexicons.insert(
        "cuisine".to_string(),
        lexicon(&[
            "thai", "sushi", "italian", "mexican", "indian", "korean", "greek", "french",
            "vietnamese", "ethiopian", "chinese", "spanish", "turkish", "lebanese",
            "southern barbecue", "dim sum", "middle eastern",
        ]),
    );
    let carrier_vocab = words(
        "please hey okay now quickly thanks maybe just um well so actually hi yo right",
    );
    TaskGrammar { templates, slot_lexicons, carrier_vocab }.with_long_tail(DEFAULT_LONG_TAIL, 0)
}

/// Synthetic values appended to every slot lexicon of [`default_grammar`].
pub const DEFAULT_LONG_TAIL: usize = 100;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_instance;

    fn tiny_schema() -> LabelSchema {
        LabelSchema::new(vec!["a".into(), "b".into(), "c".into()], vec!["x".into(), "y".into()]).unwrap()
    }

    #[test]
    fn default_grammar_is_valid() {
        let g = default_grammar();
        g.validate().unwrap();
        let schema = g.schema().unwrap();
        assert_eq!(schema.n_intents(), 8);
        assert_eq!(g.templates.len(), 40);
        assert!(schema.slot_types().len() >= 6);
        let tail = 7 * (DEFAULT_LONG_TAIL / 2 * 3);
        assert_eq!(g.vocabulary().len(), 314 + tail);
    }

    #[test]
    fn empty_grammar_is_rejected() {
        let g = TaskGrammar { templates: vec![], slot_lexicons: BTreeMap::new(), carrier_vocab: vec![] };
        let t = PseudoTranslator::for_vocabulary(&[], 0, 0);
        let sizes = CleanSizes { train: 1, dev: 1, target_train: 1, test: 1 };
        assert!(generate_clean_dataset(&g, &t, sizes, 0).is_err());
    }

    #[test]
    fn translator_is_bijective_and_invertible() {
        let g = default_grammar();
        let t = PseudoTranslator::for_vocabulary(&g.vocabulary(), 0, 5);
        assert!(t.is_bijective());
        let inv = t.inverse();
        for w in g.vocabulary() {
            assert_eq!(inv.map_token(&t.map_token(&w).unwrap()).unwrap(), w);
        }
    }

    #[test]
    fn translate_with_zero_window_keeps_labels() {
        let t = PseudoTranslator {
            lexicon: [("play", "pley"), ("jazz", "jezz")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            permute_window: 0,
        };
        let inst = Instance::hard("i", vec!["play".into(), "jazz".into()], 0, vec![0, 1], Source::Src);
        let out = pseudo_translate(&inst, &t, 1).unwrap();
        assert_eq!(out.tokens, ["pley", "jezz"]);
        assert_eq!(out.slots, inst.slots);
    }

    #[test]
    fn translate_rejects_unknown_token() {
        let t = PseudoTranslator { lexicon: BTreeMap::new(), permute_window: 0 };
        let inst = Instance::hard("i", vec!["play".into()], 0, vec![0], Source::Src);
        assert!(matches!(pseudo_translate(&inst, &t, 1), Err(Error::UnknownToken(_))));
    }

    #[test]
    fn zero_profile_is_identity_with_clean_labels() {
        let s = tiny_schema();
        let inst = Instance::hard("i", vec!["p".into(), "q".into(), "r".into()], 1, vec![1, 2, 0], Source::Trans);
        let out = inject_noise(&inst, &NoiseProfile::zero(), &s, &["z".into()], 3).unwrap();
        assert_eq!(out.tokens, inst.tokens);
        assert_eq!(out.intent, inst.intent);
        assert_eq!(out.slots, inst.slots);
        assert_eq!(out.clean, Some(CleanLabels { intent: 1, slots: vec![1, 2, 0] }));
    }

    #[test]
    fn forced_intent_flip_always_changes_intent() {
        let s = tiny_schema();
        let profile = NoiseProfile { p_intent_flip: 1.0, ..NoiseProfile::zero() };
        for seed in 0..200 {
            let inst = Instance::hard("i", vec!["p".into()], (seed % 3) as usize, vec![0], Source::Gen);
            let out = inject_noise(&inst, &profile, &s, &[], seed).unwrap();
            assert_ne!(out.intent, inst.intent);
        }
    }

    #[test]
    fn token_drop_keeps_labels_aligned_and_valid() {
        let s = tiny_schema();
        let profile = NoiseProfile { p_token_drop: 0.4, p_boundary_shift: 0.5, ..NoiseProfile::zero() };
        for seed in 0..300 {
            let inst = Instance::hard(
                "i",
                (0..6).map(|i| format!("w{i}")).collect(),
                0,
                vec![1, 2, 2, 0, 3, 4],
                Source::Gen,
            );
            let out = inject_noise(&inst, &profile, &s, &[], seed).unwrap();
            assert!(validate_instance(&out, &s).is_empty(), "{out:?}");
        }
    }

    #[test]
    fn soft_labels_are_rejected_by_noise() {
        let s = tiny_schema();
        let mut inst = Instance::hard("i", vec!["p".into()], 0, vec![0], Source::Gen);
        inst.intent = IntentLabel::Soft(vec![1.0, 0.0, 0.0]);
        assert!(inject_noise(&inst, &NoiseProfile::zero(), &s, &[], 0).is_err());
    }

    #[test]
    fn gen_must_be_noisier_in_intents() {
        let g = default_grammar();
        let t = PseudoTranslator::for_vocabulary(&g.vocabulary(), 0, 1);
        let cfg = AugmentConfig { n_src: 2, n_trans: 2, gen_copies: 1, n_dev: 1, n_test: 1 };
        let p = NoiseProfile::zero();
        assert!(build_augmented_corpora(&g, &t, &p, &p, &cfg, 0).is_err());
    }
}
