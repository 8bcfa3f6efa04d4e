//! Domain types: label schema, instances, corpora and their JSONL encoding.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::scalar::Scalar;

/// Tolerance for probability vectors summing to one.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// One BIO tag, with slot types referenced by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioTag {
    Outside,
    Begin(usize),
    Inside(usize),
}

impl BioTag {
    /// Decodes a tag id under the fixed `O, B-t0, I-t0, B-t1, ...` layout.
    pub fn from_id(id: usize) -> Self {
        match id {
            0 => BioTag::Outside,
            i if i % 2 == 1 => BioTag::Begin((i - 1) / 2),
            i => BioTag::Inside((i - 2) / 2),
        }
    }

    pub fn id(self) -> usize {
        match self {
            BioTag::Outside => 0,
            BioTag::Begin(t) => 1 + 2 * t,
            BioTag::Inside(t) => 2 + 2 * t,
        }
    }

    pub fn slot_type(self) -> Option<usize> {
        match self {
            BioTag::Outside => None,
            BioTag::Begin(t) | BioTag::Inside(t) => Some(t),
        }
    }
}

/// Intent set and BIO slot tag set. Class ids follow declaration order:
/// tag 0 is `O`, then `B-t`, `I-t` pairs per slot type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSchema {
    intents: Vec<String>,
    slot_types: Vec<String>,
    slot_tags: Vec<String>,
    intent_index: HashMap<String, usize>,
    tag_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    intents: Vec<String>,
    slot_types: Vec<String>,
}

impl LabelSchema {
    pub fn new(intents: Vec<String>, slot_types: Vec<String>) -> Result<Self> {
        if intents.is_empty() {
            return Err(Error::Config("schema needs at least one intent".into()));
        }
        let mut seen = HashSet::new();
        for name in intents.iter().chain(&slot_types) {
            if name.is_empty() || !seen.insert(name.as_str()) {
                return Err(Error::Config(format!("duplicate or empty label name {name:?}")));
            }
        }
        let mut slot_tags = vec!["O".to_string()];
        for t in &slot_types {
            slot_tags.push(format!("B-{t}"));
            slot_tags.push(format!("I-{t}"));
        }
        let intent_index = intents.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let tag_index = slot_tags.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Ok(Self { intents, slot_types, slot_tags, intent_index, tag_index })
    }

    pub fn intents(&self) -> &[String] {
        &self.intents
    }

    pub fn slot_types(&self) -> &[String] {
        &self.slot_types
    }

    pub fn slot_tags(&self) -> &[String] {
        &self.slot_tags
    }

    pub fn n_intents(&self) -> usize {
        self.intents.len()
    }

    pub fn n_tags(&self) -> usize {
        self.slot_tags.len()
    }

    pub fn intent_id(&self, name: &str) -> Option<usize> {
        self.intent_index.get(name).copied()
    }

    pub fn tag_id(&self, name: &str) -> Option<usize> {
        self.tag_index.get(name).copied()
    }

    pub fn slot_type_id(&self, name: &str) -> Option<usize> {
        self.slot_types.iter().position(|t| t == name)
    }

    pub fn tag(&self, id: usize) -> BioTag {
        BioTag::from_id(id)
    }

    pub fn tag_to_id(&self, tag: BioTag) -> usize {
        tag.id()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SchemaFile {
            intents: self.intents.clone(),
            slot_types: self.slot_types.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: SchemaFile = serde_json::from_str(s)?;
        Self::new(f.intents, f.slot_types)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(io_err(path))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Src,
    Trans,
    Gen,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntentLabel {
    Hard(usize),
    Soft(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SlotLabels {
    Hard(Vec<usize>),
    Soft(Vec<Vec<f64>>),
}

impl SlotLabels {
    pub fn len(&self) -> usize {
        match self {
            SlotLabels::Hard(v) => v.len(),
            SlotLabels::Soft(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Hidden ground truth kept alongside corrupted labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanLabels {
    pub intent: usize,
    pub slots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub tokens: Vec<String>,
    pub intent: IntentLabel,
    pub slots: SlotLabels,
    pub source: Source,
    pub clean: Option<CleanLabels>,
}

impl Instance {
    pub fn hard(
        id: impl Into<String>,
        tokens: Vec<String>,
        intent: usize,
        slots: Vec<usize>,
        source: Source,
    ) -> Self {
        Self {
            id: id.into(),
            tokens,
            intent: IntentLabel::Hard(intent),
            slots: SlotLabels::Hard(slots),
            source,
            clean: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Hard labels, if both intent and slots are hard.
    pub fn hard_labels(&self) -> Option<(usize, &[usize])> {
        match (&self.intent, &self.slots) {
            (IntentLabel::Hard(i), SlotLabels::Hard(s)) => Some((*i, s)),
            _ => None,
        }
    }

    /// Argmax reading of the stored labels (identity on hard labels).
    pub fn argmax_labels(&self) -> (usize, Vec<usize>) {
        let intent = match &self.intent {
            IntentLabel::Hard(i) => *i,
            IntentLabel::Soft(d) => crate::scalar::argmax(d),
        };
        let slots = match &self.slots {
            SlotLabels::Hard(s) => s.clone(),
            SlotLabels::Soft(d) => d.iter().map(|v| crate::scalar::argmax(v)).collect(),
        };
        (intent, slots)
    }

    pub fn soft_labels<T: Scalar>(&self, schema: &LabelSchema) -> Result<SoftLabels<T>> {
        let intent = match &self.intent {
            IntentLabel::Hard(i) => one_hot(*i, schema.n_intents())?,
            IntentLabel::Soft(d) => d.iter().map(|&p| T::of(p)).collect(),
        };
        let slots = match &self.slots {
            SlotLabels::Hard(s) => s
                .iter()
                .map(|&t| one_hot(t, schema.n_tags()))
                .collect::<Result<Vec<_>>>()?,
            SlotLabels::Soft(d) => d.iter().map(|v| v.iter().map(|&p| T::of(p)).collect()).collect(),
        };
        Ok(SoftLabels { intent, slots })
    }
}

/// Probability-vector labels over intents and per-token slot tags.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabels<T> {
    pub intent: Vec<T>,
    pub slots: Vec<Vec<T>>,
}

impl<T: Scalar> SoftLabels<T> {
    pub fn to_f64(&self) -> SoftLabels<f64> {
        SoftLabels {
            intent: self.intent.iter().map(|p| p.to_f64_lossy()).collect(),
            slots: self
                .slots
                .iter()
                .map(|v| v.iter().map(|p| p.to_f64_lossy()).collect())
                .collect(),
        }
    }

    pub fn argmax(&self) -> (usize, Vec<usize>) {
        (
            crate::scalar::argmax(&self.intent),
            self.slots.iter().map(|v| crate::scalar::argmax(v)).collect(),
        )
    }
}

pub fn one_hot<T: Scalar>(id: usize, n: usize) -> Result<Vec<T>> {
    if id >= n {
        return Err(Error::ClassOutOfRange { id, n });
    }
    let mut v = vec![T::zero(); n];
    v[id] = T::one();
    Ok(v)
}

/// One-hot soft labels for hard class ids.
pub fn to_soft<T: Scalar>(
    intent: usize,
    slots: &[usize],
    schema: &LabelSchema,
) -> Result<SoftLabels<T>> {
    Ok(SoftLabels {
        intent: one_hot(intent, schema.n_intents())?,
        slots: slots
            .iter()
            .map(|&t| one_hot(t, schema.n_tags()))
            .collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyTokens,
    LengthMismatch { tokens: usize, slots: usize },
    IntentOutOfRange(usize),
    TagOutOfRange { position: usize, id: usize },
    OrphanInside { position: usize },
    DistributionLength { what: String, expected: usize, got: usize },
    DistributionSum { what: String, sum: f64 },
    ProbabilityRange { what: String, value: f64 },
    Clean(Box<Violation>),
}

impl Violation {
    pub fn is_bio(&self) -> bool {
        match self {
            Violation::OrphanInside { .. } => true,
            Violation::Clean(v) => v.is_bio(),
            _ => false,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyTokens => write!(f, "empty token sequence"),
            Violation::LengthMismatch { tokens, slots } => {
                write!(f, "{slots} slot labels for {tokens} tokens")
            }
            Violation::IntentOutOfRange(id) => write!(f, "intent id {id} out of range"),
            Violation::TagOutOfRange { position, id } => {
                write!(f, "tag id {id} out of range at position {position}")
            }
            Violation::OrphanInside { position } => write!(f, "orphan I-tag at position {position}"),
            Violation::DistributionLength { what, expected, got } => {
                write!(f, "{what} distribution has length {got}, expected {expected}")
            }
            Violation::DistributionSum { sum, .. } => write!(f, "distribution sum {sum}"),
            Violation::ProbabilityRange { what, value } => {
                write!(f, "{what} probability {value} outside [0, 1]")
            }
            Violation::Clean(v) => write!(f, "clean labels: {v}"),
        }
    }
}

/// BIO violations of a hard tag sequence.
pub fn bio_violations(tags: &[usize], schema: &LabelSchema) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut prev = BioTag::Outside;
    for (position, &id) in tags.iter().enumerate() {
        if id >= schema.n_tags() {
            out.push(Violation::TagOutOfRange { position, id });
            prev = BioTag::Outside;
            continue;
        }
        let tag = schema.tag(id);
        if let BioTag::Inside(t) = tag {
            if prev.slot_type() != Some(t) {
                out.push(Violation::OrphanInside { position });
            }
        }
        prev = tag;
    }
    out
}

fn check_dist(dist: &[f64], n: usize, what: String, out: &mut Vec<Violation>) {
    if dist.len() != n {
        out.push(Violation::DistributionLength { what, expected: n, got: dist.len() });
        return;
    }
    if let Some(&value) = dist.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        out.push(Violation::ProbabilityRange { what: what.clone(), value });
    }
    let sum: f64 = dist.iter().sum();
    if !((sum - 1.0).abs() <= NORMALIZATION_TOL) {
        out.push(Violation::DistributionSum { what, sum });
    }
}

/// Every invariant the instance violates, in field order.
pub fn validate_instance(inst: &Instance, schema: &LabelSchema) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = inst.tokens.len();
    if n == 0 {
        out.push(Violation::EmptyTokens);
    }
    match &inst.intent {
        IntentLabel::Hard(i) if *i >= schema.n_intents() => out.push(Violation::IntentOutOfRange(*i)),
        IntentLabel::Hard(_) => {}
        IntentLabel::Soft(d) => check_dist(d, schema.n_intents(), "intent".into(), &mut out),
    }
    if inst.slots.len() != n {
        out.push(Violation::LengthMismatch { tokens: n, slots: inst.slots.len() });
    }
    match &inst.slots {
        SlotLabels::Hard(tags) => out.extend(bio_violations(tags, schema)),
        SlotLabels::Soft(dists) => {
            for (j, d) in dists.iter().enumerate() {
                check_dist(d, schema.n_tags(), format!("slot {j}"), &mut out);
            }
        }
    }
    if let Some(clean) = &inst.clean {
        if clean.intent >= schema.n_intents() {
            out.push(Violation::Clean(Box::new(Violation::IntentOutOfRange(clean.intent))));
        }
        if clean.slots.len() != n {
            out.push(Violation::Clean(Box::new(Violation::LengthMismatch {
                tokens: n,
                slots: clean.slots.len(),
            })));
        }
        out.extend(bio_violations(&clean.slots, schema).into_iter().map(|v| Violation::Clean(Box::new(v))));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub schema: LabelSchema,
    pub instances: Vec<Instance>,
}

impl Corpus {
    /// Validates every instance and id uniqueness.
    pub fn new(name: impl Into<String>, schema: LabelSchema, instances: Vec<Instance>) -> Result<Self> {
        let mut ids = HashSet::new();
        for inst in &instances {
            check_instance(inst, &schema)?;
            if !ids.insert(inst.id.as_str()) {
                return Err(Error::DuplicateId(inst.id.clone()));
            }
        }
        Ok(Self { name: name.into(), schema, instances })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

fn check_instance(inst: &Instance, schema: &LabelSchema) -> Result<()> {
    let violations = validate_instance(inst, schema);
    let Some(first) = violations.first() else {
        return Ok(());
    };
    let message = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
    if first.is_bio() && violations.iter().all(Violation::is_bio) {
        Err(Error::Bio { id: inst.id.clone(), message })
    } else {
        Err(Error::Schema { id: inst.id.clone(), message })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum IntentRecord {
    Name(String),
    Dist { dist: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SlotsRecord {
    Tags(Vec<String>),
    Dists { dists: Vec<Vec<f64>> },
}

#[derive(Serialize, Deserialize)]
struct CleanRecord {
    intent: String,
    slots: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    id: String,
    tokens: Vec<String>,
    intent: IntentRecord,
    slots: SlotsRecord,
    source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clean: Option<CleanRecord>,
}

fn tag_names(tags: &[usize], schema: &LabelSchema) -> Vec<String> {
    tags.iter().map(|&t| schema.slot_tags()[t].clone()).collect()
}

fn to_record(inst: &Instance, schema: &LabelSchema) -> InstanceRecord {
    InstanceRecord {
        id: inst.id.clone(),
        tokens: inst.tokens.clone(),
        intent: match &inst.intent {
            IntentLabel::Hard(i) => IntentRecord::Name(schema.intents()[*i].clone()),
            IntentLabel::Soft(d) => IntentRecord::Dist { dist: d.clone() },
        },
        slots: match &inst.slots {
            SlotLabels::Hard(t) => SlotsRecord::Tags(tag_names(t, schema)),
            SlotLabels::Soft(d) => SlotsRecord::Dists { dists: d.clone() },
        },
        source: inst.source,
        clean: inst.clean.as_ref().map(|c| CleanRecord {
            intent: schema.intents()[c.intent].clone(),
            slots: tag_names(&c.slots, schema),
        }),
    }
}

fn from_record(rec: InstanceRecord, schema: &LabelSchema) -> Result<Instance> {
    let id = rec.id;
    let unknown_intent =
        |name: &str| Error::Schema { id: id.clone(), message: format!("unknown intent {name:?}") };
    let tags = |names: &[String]| -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                schema.tag_id(n).ok_or_else(|| Error::Schema {
                    id: id.clone(),
                    message: format!("unknown slot tag {n:?}"),
                })
            })
            .collect()
    };
    let intent = match rec.intent {
        IntentRecord::Name(n) => IntentLabel::Hard(schema.intent_id(&n).ok_or_else(|| unknown_intent(&n))?),
        IntentRecord::Dist { dist } => IntentLabel::Soft(dist),
    };
    let slots = match rec.slots {
        SlotsRecord::Tags(names) => SlotLabels::Hard(tags(&names)?),
        SlotsRecord::Dists { dists } => SlotLabels::Soft(dists),
    };
    let clean = match rec.clean {
        Some(c) => Some(CleanLabels {
            intent: schema.intent_id(&c.intent).ok_or_else(|| unknown_intent(&c.intent))?,
            slots: tags(&c.slots)?,
        }),
        None => None,
    };
    Ok(Instance { id, tokens: rec.tokens, intent, slots, source: rec.source, clean })
}

pub fn instance_to_json(inst: &Instance, schema: &LabelSchema) -> Result<String> {
    Ok(serde_json::to_string(&to_record(inst, schema))?)
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for inst in &corpus.instances {
        writeln!(w, "{}", instance_to_json(inst, &corpus.schema)?).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a JSONL corpus; the corpus name is the file stem.
pub fn load_corpus(path: &Path, schema: &LabelSchema) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut instances = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InstanceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        instances.push(from_record(rec, schema)?);
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Corpus::new(name, schema.clone(), instances)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> LabelSchema {
        LabelSchema::new(
            vec!["play".into(), "weather".into(), "alarm".into()],
            vec!["loc".into(), "time".into()],
        )
        .unwrap()
    }

    fn toks(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn tag_layout_pairs_begin_and_inside() {
        let s = schema();
        assert_eq!(s.slot_tags(), ["O", "B-loc", "I-loc", "B-time", "I-time"]);
        for id in 0..s.n_tags() {
            assert_eq!(s.tag_to_id(s.tag(id)), id);
        }
    }

    #[test]
    fn valid_instance_has_no_violations() {
        let s = schema();
        let inst = Instance::hard("a", toks(3), 0, vec![1, 2, 0], Source::Src);
        assert!(validate_instance(&inst, &s).is_empty());
    }

    #[test]
    fn orphan_inside_is_reported_with_position() {
        let s = schema();
        let inst = Instance::hard("a", toks(3), 0, vec![0, 2, 0], Source::Src);
        let v = validate_instance(&inst, &s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "orphan I-tag at position 1");
    }

    #[test]
    fn inside_of_other_type_is_orphan() {
        let s = schema();
        assert_eq!(bio_violations(&[1, 4], &s), vec![Violation::OrphanInside { position: 1 }]);
    }

    #[test]
    fn unnormalized_soft_intent_is_reported() {
        let s = LabelSchema::new(vec!["a".into(), "b".into()], vec![]).unwrap();
        let mut inst = Instance::hard("a", toks(1), 0, vec![0], Source::Trans);
        inst.intent = IntentLabel::Soft(vec![0.6, 0.6]);
        let v = validate_instance(&inst, &s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "distribution sum 1.2");
    }

    #[test]
    fn to_soft_is_one_hot() {
        let s = schema();
        let soft: SoftLabels<f64> = to_soft(0, &[3], &s).unwrap();
        assert_eq!(soft.intent, vec![1.0, 0.0, 0.0]);
        assert_eq!(soft.slots, vec![vec![0.0, 0.0, 0.0, 1.0, 0.0]]);
        assert!(matches!(to_soft::<f64>(3, &[], &s), Err(Error::ClassOutOfRange { id: 3, n: 3 })));
    }

    #[test]
    fn load_reports_bio_violation_by_id() {
        let s = schema();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        fs::write(
            &p,
            r#"{"id":"x7","tokens":["at"],"intent":"alarm","slots":["I-time"],"source":"src"}"#,
        )
        .unwrap();
        match load_corpus(&p, &s) {
            Err(Error::Bio { id, .. }) => assert_eq!(id, "x7"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_reports_length_mismatch_as_schema_error() {
        let s = schema();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        fs::write(
            &p,
            r#"{"id":"x1","tokens":["at","noon"],"intent":"alarm","slots":["O"],"source":"src"}"#,
        )
        .unwrap();
        assert!(matches!(load_corpus(&p, &s), Err(Error::Schema { .. })));
    }

    #[test]
    fn load_reports_parse_line() {
        let s = schema();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        fs::write(
            &p,
            "{\"id\":\"a\",\"tokens\":[\"x\"],\"intent\":\"play\",\"slots\":[\"O\"],\"source\":\"src\"}\n{not json\n",
        )
        .unwrap();
        assert!(matches!(load_corpus(&p, &s), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn unknown_intent_is_schema_error() {
        let s = schema();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        fs::write(&p, r#"{"id":"a","tokens":["x"],"intent":"nope","slots":["O"],"source":"gen"}"#).unwrap();
        assert!(matches!(load_corpus(&p, &s), Err(Error::Schema { .. })));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let s = schema();
        let a = Instance::hard("a", toks(1), 0, vec![0], Source::Src);
        assert!(matches!(
            Corpus::new("c", s, vec![a.clone(), a]),
            Err(Error::DuplicateId(_))
        ));
    }
}
