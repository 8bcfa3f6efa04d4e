//! Loss and denoising kernels: joint cross-entropy, ensemble relabeling,
//! prediction-disagreement uncertainty, and the re-weighted objective.

use std::borrow::Borrow;

use crate::data::SoftLabels;
use crate::encoder::{mean_prediction, Prediction, Upstream};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Floor applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Training target: hard class ids or probability vectors.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a, T> {
    Hard { intent: usize, slots: &'a [usize] },
    Soft(&'a SoftLabels<T>),
}

impl<'a, T> From<&'a SoftLabels<T>> for Target<'a, T> {
    fn from(s: &'a SoftLabels<T>) -> Self {
        Target::Soft(s)
    }
}

fn neg_log<T: Scalar>(p: T) -> T {
    -p.max(T::of(PROB_FLOOR)).ln()
}

fn check_target<T: Scalar>(pred: &Prediction<T>, target: &Target<'_, T>) -> Result<()> {
    let (ni, nt) = (pred.intent.len(), pred.slots.first().map_or(0, Vec::len));
    let ok = match target {
        Target::Hard { intent, slots } => {
            if *intent >= ni {
                return Err(Error::ClassOutOfRange { id: *intent, n: ni });
            }
            if let Some(&t) = slots.iter().find(|&&t| t >= nt) {
                return Err(Error::ClassOutOfRange { id: t, n: nt });
            }
            slots.len() == pred.slots.len()
        }
        Target::Soft(s) => {
            s.intent.len() == ni
                && s.slots.len() == pred.slots.len()
                && s.slots.iter().all(|v| v.len() == nt)
        }
    };
    if ok && !pred.slots.is_empty() {
        Ok(())
    } else {
        Err(Error::Shape("labels do not match prediction".into()))
    }
}

/// Mean token slot cross-entropy plus intent cross-entropy.
pub fn cross_entropy<T: Scalar>(pred: &Prediction<T>, target: Target<'_, T>) -> Result<T> {
    check_target(pred, &target)?;
    let mut slot_sum = T::zero();
    let intent_term = match target {
        Target::Hard { intent, slots } => {
            for (p, &y) in pred.slots.iter().zip(slots) {
                slot_sum += neg_log(p[y]);
            }
            neg_log(pred.intent[intent])
        }
        Target::Soft(labels) => {
            for (p, y) in pred.slots.iter().zip(&labels.slots) {
                let mut inner = T::zero();
                for (&pc, &yc) in p.iter().zip(y) {
                    inner += yc * neg_log(pc);
                }
                slot_sum += inner;
            }
            let mut inner = T::zero();
            for (&pc, &yc) in pred.intent.iter().zip(&labels.intent) {
                inner += yc * neg_log(pc);
            }
            inner
        }
    };
    Ok(slot_sum / T::from_usize_lossy(pred.slots.len()) + intent_term)
}

pub fn joint_cross_entropy<T: Scalar>(pred: &Prediction<T>, labels: &SoftLabels<T>) -> Result<T> {
    cross_entropy(pred, Target::Soft(labels))
}

pub fn joint_cross_entropy_hard<T: Scalar>(
    pred: &Prediction<T>,
    intent: usize,
    slots: &[usize],
) -> Result<T> {
    cross_entropy(pred, Target::Hard { intent, slots })
}

/// Gradient of `scale * cross_entropy` with respect to the logits.
///
/// For a softmax output `p` and target `y` the logit gradient is
/// `p * sum(y) - y`; slot terms carry the extra `1/L`.
pub fn logit_gradient<T: Scalar>(pred: &Prediction<T>, target: Target<'_, T>, scale: T) -> Result<Upstream<T>> {
    check_target(pred, &target)?;
    let len = pred.slots.len();
    let slot_scale = scale / T::from_usize_lossy(len);
    let grad = |p: &[T], y: &dyn Fn(usize) -> T, s: T| -> Vec<T> {
        let total: T = (0..p.len()).map(y).sum();
        p.iter().enumerate().map(|(c, &pc)| s * (pc * total - y(c))).collect()
    };
    let up = match target {
        Target::Hard { intent, slots } => Upstream {
            intent: grad(&pred.intent, &|c| if c == intent { T::one() } else { T::zero() }, scale),
            slots: pred
                .slots
                .iter()
                .zip(slots)
                .map(|(p, &yj)| grad(p, &|c| if c == yj { T::one() } else { T::zero() }, slot_scale))
                .collect(),
        },
        Target::Soft(labels) => Upstream {
            intent: grad(&pred.intent, &|c| labels.intent[c], scale),
            slots: pred
                .slots
                .iter()
                .zip(&labels.slots)
                .map(|(p, y)| grad(p, &|c| y[c], slot_scale))
                .collect(),
        },
    };
    Ok(up)
}

fn check_ensemble<T: Scalar, P: Borrow<Prediction<T>>>(preds: &[P]) -> Result<()> {
    let first = preds
        .first()
        .ok_or_else(|| Error::InvalidArgument("need at least one prediction".into()))?
        .borrow();
    let same = |p: &Prediction<T>| {
        p.intent.len() == first.intent.len()
            && p.slots.len() == first.slots.len()
            && p.slots.iter().zip(&first.slots).all(|(a, b)| a.len() == b.len())
    };
    if preds.iter().all(|p| same(p.borrow())) {
        Ok(())
    } else {
        Err(Error::Shape("ensemble predictions differ in length".into()))
    }
}

/// Pseudo-truth labels: coordinate-wise mean of the K predicted distributions.
pub fn ensemble_relabel<T: Scalar, P: Borrow<Prediction<T>>>(preds: &[P]) -> Result<SoftLabels<T>> {
    check_ensemble(preds)?;
    let mean = mean_prediction(preds);
    Ok(SoftLabels { intent: mean.intent, slots: mean.slots })
}

fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Mean over models of the squared distance between each model's
/// distributions and the ensemble mean (intent term plus token-averaged
/// slot term).
pub fn instance_uncertainty<T: Scalar, P: Borrow<Prediction<T>>>(preds: &[P]) -> Result<T> {
    check_ensemble(preds)?;
    let mean = mean_prediction(preds);
    let len = T::from_usize_lossy(mean.slots.len().max(1));
    let total: T = preds
        .iter()
        .map(|p| {
            let p = p.borrow();
            let slot: T = p
                .slots
                .iter()
                .zip(&mean.slots)
                .map(|(a, m)| squared_distance(a, m))
                .sum();
            squared_distance(&p.intent, &mean.intent) + slot / len
        })
        .sum();
    Ok(total / T::from_usize_lossy(preds.len()))
}

/// `w = exp(-u)`.
pub fn instance_weight<T: Scalar>(u: T) -> Result<T> {
    if u.is_nan() || u < T::zero() {
        return Err(Error::InvalidArgument(format!("uncertainty must be non-negative, got {u}")));
    }
    Ok((-u).exp())
}

/// `w * cross_entropy(pred, labels)`, with `w` held constant.
pub fn weighted_joint_loss<T: Scalar>(pred: &Prediction<T>, labels: &SoftLabels<T>, w: T) -> Result<T> {
    check_weight(w)?;
    Ok(w * joint_cross_entropy(pred, labels)?)
}

pub(crate) fn check_weight<T: Scalar>(w: T) -> Result<()> {
    if w > T::zero() && w <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("instance weight must lie in (0, 1], got {w}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceLossReport<T> {
    pub loss: T,
    pub uncertainty: T,
    pub weight: T,
    pub per_model_losses: Vec<T>,
}

/// Loss of model `k`, ensemble uncertainty and weight for one instance.
pub fn instance_report<T: Scalar, P: Borrow<Prediction<T>>>(
    preds: &[P],
    target: Target<'_, T>,
    k: usize,
) -> Result<InstanceLossReport<T>> {
    let per_model_losses = preds
        .iter()
        .map(|p| cross_entropy(p.borrow(), target))
        .collect::<Result<Vec<_>>>()?;
    let loss = *per_model_losses
        .get(k)
        .ok_or_else(|| Error::InvalidArgument(format!("model index {k} out of range")))?;
    let uncertainty = instance_uncertainty(preds)?;
    Ok(InstanceLossReport { loss, uncertainty, weight: instance_weight(uncertainty)?, per_model_losses })
}
