//! Span-level slot F1, intent and exact-match accuracy, relabel
//! diagnostics against hidden clean labels, and run statistics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{BioTag, Corpus, LabelSchema, Source};
use crate::encoder::{ensemble_predict, ModelParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vocab::Vocabulary;

/// A typed span with inclusive token bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub slot_type: usize,
    pub start: usize,
    pub end: usize,
}

/// Extracts spans; an orphan `I-t` opens a new span of type `t`.
pub fn extract_spans(tags: &[usize], _schema: &LabelSchema) -> Vec<Span> {
    spans_of(tags)
}

/// Span extraction using only the tag-id layout.
pub fn spans_of(tags: &[usize]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<Span> = None;
    for (i, &id) in tags.iter().enumerate() {
        match BioTag::from_id(id) {
            BioTag::Outside => spans.extend(open.take()),
            BioTag::Begin(t) => {
                spans.extend(open.take());
                open = Some(Span { slot_type: t, start: i, end: i });
            }
            BioTag::Inside(t) => match open.as_mut() {
                Some(s) if s.slot_type == t => s.end = i,
                _ => {
                    spans.extend(open.take());
                    open = Some(Span { slot_type: t, start: i, end: i });
                }
            },
        }
    }
    spans.extend(open);
    spans
}

/// Inverse of [`extract_spans`] on valid BIO sequences.
pub fn spans_to_tags(spans: &[Span], len: usize, schema: &LabelSchema) -> Vec<usize> {
    let mut tags = vec![0; len];
    for s in spans {
        tags[s.start] = schema.tag_to_id(BioTag::Begin(s.slot_type));
        for t in &mut tags[s.start + 1..=s.end] {
            *t = schema.tag_to_id(BioTag::Inside(s.slot_type));
        }
    }
    tags
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Micro-averaged span precision, recall and F1 from pooled counts.
pub fn span_f1(pred: &[Vec<usize>], gold: &[Vec<usize>], schema: &LabelSchema) -> Result<SpanScores> {
    if pred.len() != gold.len() {
        return Err(Error::Shape(format!("{} predicted vs {} gold sequences", pred.len(), gold.len())));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(Error::Shape(format!("sequence {i}: {} predicted vs {} gold tags", p.len(), g.len())));
        }
        let ps = extract_spans(p, schema);
        let gs = extract_spans(g, schema);
        let hits = ps.iter().filter(|s| gs.contains(s)).count();
        tp += hits;
        fp += ps.len() - hits;
        fn_ += gs.len() - hits;
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(SpanScores { precision, recall, f1, true_positives: tp, false_positives: fp, false_negatives: fn_ })
}

/// Hard (intent, slot tags) reading of one utterance.
pub type Labeling = (usize, Vec<usize>);

fn check_aligned(preds: &[Labeling], golds: &[Labeling]) -> Result<()> {
    if preds.len() != golds.len() {
        return Err(Error::Shape(format!("{} predictions vs {} gold instances", preds.len(), golds.len())));
    }
    Ok(())
}

pub fn intent_accuracy(preds: &[Labeling], golds: &[Labeling]) -> Result<f64> {
    check_aligned(preds, golds)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| p.0 == g.0).count();
    Ok(ratio(hits, preds.len()))
}

/// Fraction of utterances with correct intent and identical slot sequence.
pub fn exact_match_accuracy(preds: &[Labeling], golds: &[Labeling]) -> Result<f64> {
    check_aligned(preds, golds)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(ratio(hits, preds.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub slot_precision: f64,
    pub slot_recall: f64,
    pub slot_f1: f64,
    pub intent_accuracy: f64,
    pub exact_match: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub instances: usize,
}

pub fn score(preds: &[Labeling], golds: &[Labeling], schema: &LabelSchema) -> Result<EvalResult> {
    check_aligned(preds, golds)?;
    let p_tags: Vec<_> = preds.iter().map(|p| p.1.clone()).collect();
    let g_tags: Vec<_> = golds.iter().map(|g| g.1.clone()).collect();
    let spans = span_f1(&p_tags, &g_tags, schema)?;
    Ok(EvalResult {
        slot_precision: spans.precision,
        slot_recall: spans.recall,
        slot_f1: spans.f1,
        intent_accuracy: intent_accuracy(preds, golds)?,
        exact_match: exact_match_accuracy(preds, golds)?,
        true_positives: spans.true_positives,
        false_positives: spans.false_positives,
        false_negatives: spans.false_negatives,
        instances: preds.len(),
    })
}

/// Ensemble-mean argmax predictions for every instance of `corpus`.
pub fn predict_corpus<T: Scalar>(
    models: &[ModelParams<T>],
    corpus: &Corpus,
    vocab: &Vocabulary,
) -> Result<Vec<Labeling>> {
    corpus
        .instances
        .iter()
        .map(|inst| Ok(ensemble_predict(models, &vocab.encode(&inst.tokens))?.argmax()))
        .collect()
}

/// Scores the ensemble against the corpus' stored labels (argmax if soft).
pub fn evaluate<T: Scalar>(models: &[ModelParams<T>], corpus: &Corpus, vocab: &Vocabulary) -> Result<EvalResult> {
    let preds = predict_corpus(models, corpus, vocab)?;
    let golds: Vec<_> = corpus.instances.iter().map(|i| i.argmax_labels()).collect();
    score(&preds, &golds, &corpus.schema)
}

/// Modification rates and label error of relabeled augmented instances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RelabelDiagnostics {
    pub instances: usize,
    pub intent_modified_frac: f64,
    pub slot_modified_frac: f64,
    /// Pooled over intent and slot-token labels.
    pub label_error_before: f64,
    pub label_error_after: f64,
    pub intent_error_before: f64,
    pub intent_error_after: f64,
    pub slot_error_before: f64,
    pub slot_error_after: f64,
    /// Modification taxonomy, as fractions of instances.
    pub intent_change: f64,
    pub slot_change: f64,
    pub boundary_change: f64,
    pub slot_boundary_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotModification {
    None,
    /// Same span boundaries, different types.
    Slot,
    /// Different boundaries; every changed span keeps an overlapping span of its type.
    Boundary,
    SlotAndBoundary,
}

pub fn classify_slot_modification(before: &[usize], after: &[usize], schema: &LabelSchema) -> SlotModification {
    if before == after {
        return SlotModification::None;
    }
    let b = extract_spans(before, schema);
    let a = extract_spans(after, schema);
    let bounds = |s: &[Span]| s.iter().map(|x| (x.start, x.end)).collect::<Vec<_>>();
    if bounds(&b) == bounds(&a) {
        return SlotModification::Slot;
    }
    let overlaps = |x: &Span, y: &Span| x.start <= y.end && y.start <= x.end;
    let type_kept = |from: &[Span], to: &[Span]| {
        from.iter()
            .filter(|s| !to.contains(s))
            .all(|s| to.iter().any(|t| t.slot_type == s.slot_type && overlaps(s, t)))
    };
    if type_kept(&b, &a) && type_kept(&a, &b) {
        SlotModification::Boundary
    } else {
        SlotModification::SlotAndBoundary
    }
}

/// Compares argmax labels of augmented (non-source) instances before and
/// after relabeling, and both against the hidden clean labels.
pub fn relabel_diagnostics(after: &Corpus, before: &Corpus) -> Result<RelabelDiagnostics> {
    let schema = &before.schema;
    let after_by_id: HashMap<&str, _> = after.instances.iter().map(|i| (i.id.as_str(), i)).collect();
    if after_by_id.len() != before.instances.len() {
        return Err(Error::InvalidArgument("corpora differ in size".into()));
    }
    let mut d = RelabelDiagnostics::default();
    let (mut n, mut tokens) = (0usize, 0usize);
    let (mut int_mod, mut slot_mod) = (0usize, 0usize);
    let (mut int_err_b, mut int_err_a, mut slot_err_b, mut slot_err_a) = (0usize, 0usize, 0usize, 0usize);
    let mut buckets = [0usize; 4];
    for b in &before.instances {
        let a = after_by_id
            .get(b.id.as_str())
            .ok_or_else(|| Error::InvalidArgument(format!("instance {} missing after relabeling", b.id)))?;
        if b.source == Source::Src {
            continue;
        }
        let clean = b
            .clean
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("instance {} has no clean labels", b.id)))?;
        let (bi, bs) = b.argmax_labels();
        let (ai, as_) = a.argmax_labels();
        if bs.len() != as_.len() || bs.len() != clean.slots.len() {
            return Err(Error::Shape(format!("instance {} changed length", b.id)));
        }
        n += 1;
        tokens += bs.len();
        int_mod += usize::from(bi != ai);
        slot_mod += usize::from(bs != as_);
        int_err_b += usize::from(bi != clean.intent);
        int_err_a += usize::from(ai != clean.intent);
        slot_err_b += bs.iter().zip(&clean.slots).filter(|(x, y)| x != y).count();
        slot_err_a += as_.iter().zip(&clean.slots).filter(|(x, y)| x != y).count();
        if bi != ai {
            buckets[0] += 1;
        }
        match classify_slot_modification(&bs, &as_, schema) {
            SlotModification::None => {}
            SlotModification::Slot => buckets[1] += 1,
            SlotModification::Boundary => buckets[2] += 1,
            SlotModification::SlotAndBoundary => buckets[3] += 1,
        }
    }
    d.instances = n;
    d.intent_modified_frac = ratio(int_mod, n);
    d.slot_modified_frac = ratio(slot_mod, n);
    d.intent_error_before = ratio(int_err_b, n);
    d.intent_error_after = ratio(int_err_a, n);
    d.slot_error_before = ratio(slot_err_b, tokens);
    d.slot_error_after = ratio(slot_err_a, tokens);
    d.label_error_before = ratio(int_err_b + slot_err_b, n + tokens);
    d.label_error_after = ratio(int_err_a + slot_err_a, n + tokens);
    d.intent_change = ratio(buckets[0], n);
    d.slot_change = ratio(buckets[1], n);
    d.boundary_change = ratio(buckets[2], n);
    d.slot_boundary_change = ratio(buckets[3], n);
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedStats {
    pub mean_a: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub stdev_a: f64,
    pub mean_b: f64,
    pub stdev_b: f64,
    /// Population standard deviation (n denominator).
    pub pop_stdev_a: f64,
    pub pop_stdev_b: f64,
    /// Welch statistic for `mean_a - mean_b`.
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sum_sq_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

pub fn sample_stdev(xs: &[f64]) -> f64 {
    (sum_sq_dev(xs) / (xs.len() as f64 - 1.0)).sqrt()
}

pub fn population_stdev(xs: &[f64]) -> f64 {
    (sum_sq_dev(xs) / xs.len() as f64).sqrt()
}

/// Means, standard deviations and a two-sided Welch t-test.
pub fn paired_stats(a: &[f64], b: &[f64]) -> Result<PairedStats> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument("each sample needs at least two values".into()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (sa, sb) = (sample_stdev(a), sample_stdev(b));
    let (va, vb) = (sa * sa / a.len() as f64, sb * sb / b.len() as f64);
    let se2 = va + vb;
    let (t, df, p) = if se2 == 0.0 {
        if ma == mb {
            (0.0, f64::NAN, 1.0)
        } else {
            ((ma - mb).signum() * f64::INFINITY, f64::NAN, 0.0)
        }
    } else {
        let t = (ma - mb) / se2.sqrt();
        let df = se2 * se2
            / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        (t, df, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    Ok(PairedStats {
        mean_a: ma,
        stdev_a: sa,
        mean_b: mb,
        stdev_b: sb,
        pop_stdev_a: population_stdev(a),
        pop_stdev_b: population_stdev(b),
        t,
        df,
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> LabelSchema {
        LabelSchema::new(vec!["a".into(), "b".into()], vec!["time".into(), "loc".into()]).unwrap()
    }

    fn tags(s: &LabelSchema, names: &[&str]) -> Vec<usize> {
        names.iter().map(|n| s.tag_id(n).unwrap()).collect()
    }

    #[test]
    fn orphan_inside_opens_a_span() {
        let s = schema();
        let spans = extract_spans(&tags(&s, &["O", "I-loc", "I-loc", "B-time"]), &s);
        assert_eq!(
            spans,
            vec![Span { slot_type: 1, start: 1, end: 2 }, Span { slot_type: 0, start: 3, end: 3 }]
        );
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let s = schema();
        let g = vec![tags(&s, &["B-time", "I-time", "O"]), tags(&s, &["B-loc"])];
        let r = span_f1(&g, &g, &s).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn no_predicted_spans_scores_zero() {
        let s = schema();
        let r = span_f1(&[tags(&s, &["O", "O"])], &[tags(&s, &["B-loc", "O"])], &s).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let s = schema();
        assert!(span_f1(&[vec![0]], &[vec![0, 0]], &s).is_err());
        assert!(intent_accuracy(&[(0, vec![])], &[]).is_err());
    }

    #[test]
    fn exact_match_counts_whole_utterances() {
        let golds = vec![(0, vec![0, 1]), (1, vec![0]), (1, vec![3, 4]), (0, vec![0])];
        let mut preds = golds.clone();
        preds[2].1[1] = 0;
        assert_eq!(exact_match_accuracy(&preds, &golds).unwrap(), 0.75);
        assert_eq!(intent_accuracy(&preds, &golds).unwrap(), 1.0);
    }

    #[test]
    fn intent_accuracy_counts() {
        let golds: Vec<Labeling> = (0..10).map(|i| (i % 2, vec![0])).collect();
        let preds: Vec<Labeling> = golds
            .iter()
            .enumerate()
            .map(|(i, g)| (if i < 7 { g.0 } else { 1 - g.0 }, g.1.clone()))
            .collect();
        assert!((intent_accuracy(&preds, &golds).unwrap() - 0.7).abs() < 1e-15);
        let wrong: Vec<Labeling> = golds.iter().map(|g| (1 - g.0, g.1.clone())).collect();
        assert_eq!(intent_accuracy(&wrong, &golds).unwrap(), 0.0);
    }

    #[test]
    fn modification_taxonomy() {
        let s = schema();
        let b = tags(&s, &["B-time", "I-time", "O"]);
        assert_eq!(classify_slot_modification(&b, &b, &s), SlotModification::None);
        let slot = tags(&s, &["B-loc", "I-loc", "O"]);
        assert_eq!(classify_slot_modification(&b, &slot, &s), SlotModification::Slot);
        let boundary = tags(&s, &["B-time", "I-time", "I-time"]);
        assert_eq!(classify_slot_modification(&b, &boundary, &s), SlotModification::Boundary);
        let both = tags(&s, &["B-loc", "O", "O"]);
        assert_eq!(classify_slot_modification(&b, &both, &s), SlotModification::SlotAndBoundary);
    }

    #[test]
    fn textbook_stdev() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(sample_stdev(&[1.0, 2.0, 3.0]), 1.0);
    }

    #[test]
    fn identical_samples_have_unit_p() {
        let s = paired_stats(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.t, 0.0);
        assert!((s.p - 1.0).abs() < 1e-12);
        let c = paired_stats(&[2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!((c.t, c.p), (0.0, 1.0));
    }

    #[test]
    fn too_small_samples_are_rejected() {
        assert!(paired_stats(&[1.0], &[1.0, 2.0]).is_err());
    }
}
