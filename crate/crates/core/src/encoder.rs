//! Reference encoder: token embeddings, a three-token tanh context mixer,
//! mean-pooled sentence state, and softmax intent/slot heads.
//!
//! ```text
//! c_i = [e_{i-1}; e_i; e_{i+1}]        (zero padding at the edges)
//! h_i = tanh(W_h c_i + b_h)
//! h_0 = mean_i h_i
//! p_I = softmax(W_I h_0 + b_I),  p_S_i = softmax(W_S h_i + b_S)
//! ```

use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::LabelSchema;
use crate::error::{io_err, Error, Result};
use crate::rng::{rng_for, stream};
use crate::scalar::{shifted_mean, softmax_into, Scalar};

/// Half-width of the uniform initialization range.
pub const INIT_RANGE: f64 = 0.1;

pub const DEFAULT_WIDTH: usize = 32;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out = self * x + bias`.
    fn affine_into(&self, x: &[T], bias: &[T], out: &mut [T]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = bias[r];
            for (&w, &xi) in self.row(r).iter().zip(x) {
                acc += w * xi;
            }
            *o = acc;
        }
    }

    /// `self += g ⊗ x`.
    fn add_outer(&mut self, g: &[T], x: &[T]) {
        for (r, &gr) in g.iter().enumerate() {
            if gr == T::zero() {
                continue;
            }
            for (w, &xi) in self.row_mut(r).iter_mut().zip(x) {
                *w += gr * xi;
            }
        }
    }

    /// `out += selfᵀ g`.
    fn add_transpose_mul(&self, g: &[T], out: &mut [T]) {
        for (r, &gr) in g.iter().enumerate() {
            if gr == T::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(r)) {
                *o += gr * w;
            }
        }
    }
}

pub const TENSOR_NAMES: [&str; 7] =
    ["embeddings", "w_h", "b_h", "w_intent", "b_intent", "w_slot", "b_slot"];

/// All trainable tensors of the encoder and both heads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub embeddings: Matrix<T>,
    pub w_h: Matrix<T>,
    pub b_h: Vec<T>,
    pub w_intent: Matrix<T>,
    pub b_intent: Vec<T>,
    pub w_slot: Matrix<T>,
    pub b_slot: Vec<T>,
}

/// Parameter-shaped gradient accumulator.
pub type Gradients<T> = ModelParams<T>;

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(vocab_size: usize, width: usize, n_intents: usize, n_tags: usize) -> Self {
        Self {
            embeddings: Matrix::zeros(vocab_size, width),
            w_h: Matrix::zeros(width, 3 * width),
            b_h: vec![T::zero(); width],
            w_intent: Matrix::zeros(n_intents, width),
            b_intent: vec![T::zero(); n_intents],
            w_slot: Matrix::zeros(n_tags, width),
            b_slot: vec![T::zero(); n_tags],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.vocab_size(), self.width(), self.n_intents(), self.n_tags())
    }

    pub fn width(&self) -> usize {
        self.embeddings.cols
    }

    pub fn vocab_size(&self) -> usize {
        self.embeddings.rows
    }

    pub fn n_intents(&self) -> usize {
        self.b_intent.len()
    }

    pub fn n_tags(&self) -> usize {
        self.b_slot.len()
    }

    pub fn tensors(&self) -> [&[T]; 7] {
        [
            &self.embeddings.data,
            &self.w_h.data,
            &self.b_h,
            &self.w_intent.data,
            &self.b_intent,
            &self.w_slot.data,
            &self.b_slot,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [T]; 7] {
        [
            &mut self.embeddings.data,
            &mut self.w_h.data,
            &mut self.b_h,
            &mut self.w_intent.data,
            &mut self.b_intent,
            &mut self.w_slot.data,
            &mut self.b_slot,
        ]
    }

    pub fn tensor_shapes(&self) -> [(usize, usize); 7] {
        let d = self.width();
        [
            (self.vocab_size(), d),
            (d, 3 * d),
            (d, 1),
            (self.n_intents(), d),
            (self.n_intents(), 1),
            (self.n_tags(), d),
            (self.n_tags(), 1),
        ]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.tensor_shapes() == other.tensor_shapes()
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(T::zero());
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let m = |x: &Matrix<T>| Matrix {
            rows: x.rows,
            cols: x.cols,
            data: x.data.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
        };
        let v = |x: &[T]| x.iter().map(|v| U::of(v.to_f64_lossy())).collect();
        ModelParams {
            embeddings: m(&self.embeddings),
            w_h: m(&self.w_h),
            b_h: v(&self.b_h),
            w_intent: m(&self.w_intent),
            b_intent: v(&self.b_intent),
            w_slot: m(&self.w_slot),
            b_slot: v(&self.b_slot),
        }
    }
}

/// Entries i.i.d. uniform on [-0.1, 0.1], drawn tensor by tensor.
pub fn init_params<T: Scalar>(
    vocab_size: usize,
    width: usize,
    schema: &LabelSchema,
    seed: u64,
) -> Result<ModelParams<T>> {
    if vocab_size == 0 {
        return Err(Error::InvalidArgument("vocabulary is empty".into()));
    }
    if width == 0 {
        return Err(Error::InvalidArgument("embedding width must be at least 1".into()));
    }
    let mut params = ModelParams::zeros(vocab_size, width, schema.n_intents(), schema.n_tags());
    let mut rng = rng_for(seed, &[stream::INIT]);
    for t in params.tensors_mut() {
        for x in t.iter_mut() {
            *x = T::of(rng.gen_range(-INIT_RANGE..=INIT_RANGE));
        }
    }
    Ok(params)
}

/// Activations kept from the forward pass for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Cache<T> {
    pub tokens: Vec<usize>,
    /// L × 3d concatenated windows.
    pub contexts: Vec<T>,
    /// L × d token states.
    pub hidden: Vec<T>,
    /// Mean-pooled sentence state.
    pub pooled: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub intent: Vec<T>,
    pub slots: Vec<Vec<T>>,
    pub cache: Option<Cache<T>>,
}

impl<T: Scalar> Prediction<T> {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn argmax(&self) -> (usize, Vec<usize>) {
        (
            crate::scalar::argmax(&self.intent),
            self.slots.iter().map(|s| crate::scalar::argmax(s)).collect(),
        )
    }
}

/// Loss gradients with respect to the pre-softmax logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Upstream<T> {
    pub intent: Vec<T>,
    pub slots: Vec<Vec<T>>,
}

impl<T: Scalar> Upstream<T> {
    pub fn zeros(n_intents: usize, n_tags: usize, len: usize) -> Self {
        Self { intent: vec![T::zero(); n_intents], slots: vec![vec![T::zero(); n_tags]; len] }
    }
}

fn check_tokens(params_vocab: usize, tokens: &[usize]) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("empty token sequence".into()));
    }
    if let Some(&id) = tokens.iter().find(|&&t| t >= params_vocab) {
        return Err(Error::TokenOutOfRange { id, size: params_vocab });
    }
    Ok(())
}

pub fn forward<T: Scalar>(params: &ModelParams<T>, tokens: &[usize]) -> Result<Prediction<T>> {
    forward_impl(params, tokens, true)
}

fn forward_impl<T: Scalar>(
    params: &ModelParams<T>,
    tokens: &[usize],
    keep_cache: bool,
) -> Result<Prediction<T>> {
    check_tokens(params.vocab_size(), tokens)?;
    let d = params.width();
    let len = tokens.len();
    let mut contexts = vec![T::zero(); len * 3 * d];
    for (i, ctx) in contexts.chunks_mut(3 * d).enumerate() {
        if i > 0 {
            ctx[..d].copy_from_slice(params.embeddings.row(tokens[i - 1]));
        }
        ctx[d..2 * d].copy_from_slice(params.embeddings.row(tokens[i]));
        if i + 1 < len {
            ctx[2 * d..].copy_from_slice(params.embeddings.row(tokens[i + 1]));
        }
    }
    let mut hidden = vec![T::zero(); len * d];
    for (h, ctx) in hidden.chunks_mut(d).zip(contexts.chunks(3 * d)) {
        params.w_h.affine_into(ctx, &params.b_h, h);
        h.iter_mut().for_each(|x| *x = x.tanh());
    }
    let mut pooled = vec![T::zero(); d];
    for h in hidden.chunks(d) {
        for (p, &x) in pooled.iter_mut().zip(h) {
            *p += x;
        }
    }
    let inv_len = T::one() / T::from_usize_lossy(len);
    pooled.iter_mut().for_each(|p| *p *= inv_len);

    let mut logits = vec![T::zero(); params.n_intents()];
    params.w_intent.affine_into(&pooled, &params.b_intent, &mut logits);
    let mut intent = vec![T::zero(); params.n_intents()];
    softmax_into(&logits, &mut intent);

    let mut logits = vec![T::zero(); params.n_tags()];
    let slots = hidden
        .chunks(d)
        .map(|h| {
            params.w_slot.affine_into(h, &params.b_slot, &mut logits);
            let mut p = vec![T::zero(); params.n_tags()];
            softmax_into(&logits, &mut p);
            p
        })
        .collect();
    let cache = keep_cache.then(|| Cache { tokens: tokens.to_vec(), contexts, hidden, pooled });
    Ok(Prediction { intent, slots, cache })
}

/// Accumulates parameter gradients into `grads` given logit gradients.
pub fn backward<T: Scalar>(
    params: &ModelParams<T>,
    tokens: &[usize],
    pred: &Prediction<T>,
    upstream: &Upstream<T>,
    grads: &mut Gradients<T>,
) -> Result<()> {
    let cache = pred
        .cache
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("prediction carries no forward cache".into()))?;
    if cache.tokens != tokens {
        return Err(Error::InvalidArgument("forward cache was computed for different tokens".into()));
    }
    if !params.same_shape(grads) {
        return Err(Error::Shape("gradient buffer does not match parameters".into()));
    }
    let len = tokens.len();
    if upstream.intent.len() != params.n_intents()
        || upstream.slots.len() != len
        || upstream.slots.iter().any(|g| g.len() != params.n_tags())
    {
        return Err(Error::Shape("upstream gradient does not match prediction".into()));
    }
    let d = params.width();

    grads.w_intent.add_outer(&upstream.intent, &cache.pooled);
    for (b, &g) in grads.b_intent.iter_mut().zip(&upstream.intent) {
        *b += g;
    }
    let mut g_pooled = vec![T::zero(); d];
    params.w_intent.add_transpose_mul(&upstream.intent, &mut g_pooled);
    let inv_len = T::one() / T::from_usize_lossy(len);
    g_pooled.iter_mut().for_each(|g| *g *= inv_len);

    let mut g_h = vec![T::zero(); d];
    let mut g_ctx = vec![T::zero(); 3 * d];
    for i in 0..len {
        let h = &cache.hidden[i * d..(i + 1) * d];
        let ctx = &cache.contexts[i * 3 * d..(i + 1) * 3 * d];
        let g_logits = &upstream.slots[i];

        grads.w_slot.add_outer(g_logits, h);
        for (b, &g) in grads.b_slot.iter_mut().zip(g_logits) {
            *b += g;
        }
        g_h.copy_from_slice(&g_pooled);
        params.w_slot.add_transpose_mul(g_logits, &mut g_h);
        // through tanh
        for (g, &hv) in g_h.iter_mut().zip(h) {
            *g *= T::one() - hv * hv;
        }
        grads.w_h.add_outer(&g_h, ctx);
        for (b, &g) in grads.b_h.iter_mut().zip(&g_h) {
            *b += g;
        }
        g_ctx.fill(T::zero());
        params.w_h.add_transpose_mul(&g_h, &mut g_ctx);
        if i > 0 {
            add_into(grads.embeddings.row_mut(tokens[i - 1]), &g_ctx[..d]);
        }
        add_into(grads.embeddings.row_mut(tokens[i]), &g_ctx[d..2 * d]);
        if i + 1 < len {
            add_into(grads.embeddings.row_mut(tokens[i + 1]), &g_ctx[2 * d..]);
        }
    }
    Ok(())
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Coordinate-wise mean of the member distributions; carries no cache.
pub fn ensemble_predict<T: Scalar>(models: &[ModelParams<T>], tokens: &[usize]) -> Result<Prediction<T>> {
    let first = models
        .first()
        .ok_or_else(|| Error::InvalidArgument("ensemble needs at least one model".into()))?;
    if models.iter().any(|m| !m.same_shape(first)) {
        return Err(Error::Shape("ensemble members have different shapes".into()));
    }
    let preds = models
        .iter()
        .map(|m| forward_impl(m, tokens, false))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_prediction(&preds))
}

pub(crate) fn mean_prediction<T: Scalar, P: std::borrow::Borrow<Prediction<T>>>(preds: &[P]) -> Prediction<T> {
    let first = preds[0].borrow();
    let intent = (0..first.intent.len())
        .map(|c| shifted_mean(preds.iter().map(|p| p.borrow().intent[c])))
        .collect();
    let slots = (0..first.slots.len())
        .map(|j| {
            (0..first.slots[j].len())
                .map(|c| shifted_mean(preds.iter().map(|p| p.borrow().slots[j][c])))
                .collect()
        })
        .collect();
    Prediction { intent, slots, cache: None }
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    width: usize,
    tensors: Vec<TensorRecord>,
}

pub const CHECKPOINT_FORMAT: &str = "slu-denoise/params";
pub const CHECKPOINT_VERSION: u32 = 1;

impl<T: Scalar> ModelParams<T> {
    /// JSON tensor dump; shortest round-trip decimal per value, exact in f64.
    pub fn to_checkpoint_json(&self) -> Result<String> {
        let tensors = TENSOR_NAMES
            .iter()
            .zip(self.tensors())
            .zip(self.tensor_shapes())
            .map(|((name, data), (r, c))| TensorRecord {
                name: name.to_string(),
                shape: [r, c],
                data: data.iter().map(|x| x.to_f64_lossy()).collect(),
            })
            .collect();
        Ok(serde_json::to_string(&CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            width: self.width(),
            tensors,
        })?)
    }

    pub fn from_checkpoint_json(s: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(s)?;
        if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{}",
                file.format, file.version
            )));
        }
        if file.tensors.len() != TENSOR_NAMES.len() {
            return Err(Error::Shape("checkpoint tensor count".into()));
        }
        let shape = |i: usize| file.tensors[i].shape;
        let mut params = Self::zeros(shape(0)[0], file.width, shape(3)[0], shape(5)[0]);
        let expected = params.tensor_shapes();
        for ((rec, dst), (name, (r, c))) in file
            .tensors
            .iter()
            .zip(params.tensors_mut())
            .zip(TENSOR_NAMES.iter().zip(expected))
        {
            if rec.name != *name || rec.shape != [r, c] || rec.data.len() != r * c {
                return Err(Error::Shape(format!("checkpoint tensor {}", rec.name)));
            }
            for (d, &v) in dst.iter_mut().zip(&rec.data) {
                *d = T::of(v);
            }
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_checkpoint_json()? + "\n").map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint_json(&fs::read_to_string(path).map_err(io_err(path))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> LabelSchema {
        LabelSchema::new(vec!["a".into(), "b".into(), "c".into()], vec!["x".into(), "y".into()]).unwrap()
    }

    #[test]
    fn zero_params_give_uniform_outputs() {
        let p = ModelParams::<f64>::zeros(5, 4, 3, 5);
        let pred = forward(&p, &[1, 2, 3]).unwrap();
        assert!(pred.intent.iter().all(|&x| x == 1.0 / 3.0));
        assert!(pred.slots.iter().flatten().all(|&x| x == 0.2));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_params::<f64>(10, 4, &schema(), 9).unwrap();
        let b = init_params::<f64>(10, 4, &schema(), 9).unwrap();
        let c = init_params::<f64>(10, 4, &schema(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.tensors().iter().flat_map(|t| t.iter()).all(|x| x.abs() <= INIT_RANGE));
    }

    #[test]
    fn init_rejects_empty_vocab() {
        assert!(init_params::<f64>(0, 4, &schema(), 1).is_err());
    }

    #[test]
    fn out_of_range_token_is_rejected() {
        let p = init_params::<f64>(4, 2, &schema(), 1).unwrap();
        assert!(matches!(forward(&p, &[0, 4]), Err(Error::TokenOutOfRange { id: 4, size: 4 })));
    }

    #[test]
    fn backward_rejects_mismatched_cache() {
        let p = init_params::<f64>(4, 2, &schema(), 1).unwrap();
        let pred = forward(&p, &[1, 2]).unwrap();
        let up = Upstream::zeros(3, 5, 2);
        let mut g = p.zeros_like();
        assert!(backward(&p, &[2, 1], &pred, &up, &mut g).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = init_params::<f64>(6, 3, &schema(), 4).unwrap();
        let pred = forward(&p, &[1, 5, 2]).unwrap();
        let mut g = p.zeros_like();
        backward(&p, &[1, 5, 2], &pred, &Upstream::zeros(3, 5, 3), &mut g).unwrap();
        assert!(g.tensors().iter().flat_map(|t| t.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let p = init_params::<f64>(7, 3, &schema(), 11).unwrap();
        let q = ModelParams::<f64>::from_checkpoint_json(&p.to_checkpoint_json().unwrap()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn f32_forward_is_normalized() {
        let p = init_params::<f32>(7, 3, &schema(), 11).unwrap();
        let pred = forward(&p, &[1, 2]).unwrap();
        assert!((pred.intent.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }
}
