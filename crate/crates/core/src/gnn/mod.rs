//! Graph Isomorphism Network over molecular graphs.
//!
//! Three GIN layers (`7 -> 64 -> 64`, then `64 -> 64 -> 64` twice), each
//! `h' = relu(MLP((1 + eps) h + sum of neighbour h))` with
//! `MLP = affine, relu, affine`. A graph readout (sum by default) feeds
//! `64 -> 128`, relu, `128 -> 128`, which is the embedding, and a linear
//! `128 -> 2` classifier. Inputs are standardized per feature with statistics
//! from the training graphs.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{MolecularGraph, NODE_FEATURES};
use crate::io::{read_gprm, write_gprm, Tensor};
use crate::linalg::Matrix;
use crate::nn::{
    affine, cross_entropy, cross_entropy_difference, finite_difference_check, glorot, relu,
    relu_backward, relu_half_difference, softmax_row, Adam, AdamConfig, GradCheck, Params,
};
pub use crate::nn::{EpochLog, TrainOutcome};
use crate::scalar::Scalar;

pub const GIN_LAYERS: usize = 3;
pub const GIN_HIDDEN: usize = 64;
pub const EMBED_DIM: usize = 128;
pub const N_CLASSES: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pooling {
    Sum,
    Mean,
}

impl Pooling {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sum" => Some(Self::Sum),
            "mean" => Some(Self::Mean),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sum => "sum",
            Self::Mean => "mean",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GinParams<T> {
    /// Input standardization, applied before the first layer.
    pub input_shift: Vec<T>,
    pub input_scale: Vec<T>,
    pub eps: [T; GIN_LAYERS],
    pub pooling: Pooling,
    /// Trainable tensors; see [`GinParams::init`] for the order.
    pub weights: Params<T>,
}

// Indices into `weights`.
const fn layer_w1(l: usize) -> usize {
    4 * l
}
const READOUT: usize = 4 * GIN_LAYERS;
const HEAD: usize = READOUT + 4;

impl<T: Scalar> GinParams<T> {
    /// Glorot weights and zero biases. Tensor order: for each layer `w1, b1,
    /// w2, b2`; then `readout.w1, readout.b1, readout.w2, readout.b2`; then
    /// `head.w, head.b`.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Params::new();
        for l in 0..GIN_LAYERS {
            let din = if l == 0 { NODE_FEATURES } else { GIN_HIDDEN };
            w.push(format!("gin{l}.w1"), glorot(&mut rng, din, GIN_HIDDEN));
            w.push(format!("gin{l}.b1"), Matrix::zeros(1, GIN_HIDDEN));
            w.push(
                format!("gin{l}.w2"),
                glorot(&mut rng, GIN_HIDDEN, GIN_HIDDEN),
            );
            w.push(format!("gin{l}.b2"), Matrix::zeros(1, GIN_HIDDEN));
        }
        w.push("readout.w1", glorot(&mut rng, GIN_HIDDEN, EMBED_DIM));
        w.push("readout.b1", Matrix::zeros(1, EMBED_DIM));
        w.push("readout.w2", glorot(&mut rng, EMBED_DIM, EMBED_DIM));
        w.push("readout.b2", Matrix::zeros(1, EMBED_DIM));
        w.push("head.w", glorot(&mut rng, EMBED_DIM, N_CLASSES));
        w.push("head.b", Matrix::zeros(1, N_CLASSES));
        Self {
            input_shift: vec![T::zero(); NODE_FEATURES],
            input_scale: vec![T::one(); NODE_FEATURES],
            eps: [T::zero(); GIN_LAYERS],
            pooling: Pooling::Sum,
            weights: w,
        }
    }

    /// Sets the input standardization from the nodes of `graphs`.
    pub fn fit_input_scaling(&mut self, graphs: &[MolecularGraph]) {
        let mut count = 0usize;
        let mut sum = [0.0f64; NODE_FEATURES];
        let mut sq = [0.0f64; NODE_FEATURES];
        for g in graphs {
            for f in &g.node_features {
                for k in 0..NODE_FEATURES {
                    sum[k] += f[k];
                    sq[k] += f[k] * f[k];
                }
                count += 1;
            }
        }
        if count == 0 {
            return;
        }
        let n = count as f64;
        for k in 0..NODE_FEATURES {
            let mean = sum[k] / n;
            let sd = (sq[k] / n - mean * mean).max(0.0).sqrt();
            self.input_shift[k] = T::of(mean);
            self.input_scale[k] = T::of(if sd > 1e-12 { 1.0 / sd } else { 1.0 });
        }
    }

    fn w(&self, k: usize) -> &Matrix<T> {
        &self.weights.tensors[k]
    }

    pub fn cast<U: Scalar>(&self) -> GinParams<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of(x.as_f64())).collect::<Vec<U>>();
        GinParams {
            input_shift: conv(&self.input_shift),
            input_scale: conv(&self.input_scale),
            eps: self.eps.map(|e| U::of(e.as_f64())),
            pooling: self.pooling,
            weights: Params {
                names: self.weights.names.clone(),
                tensors: self.weights.tensors.iter().map(Matrix::cast).collect(),
            },
        }
    }

    /// GPRM layout: `input.shift` and `input.scale` (`1 x 7`), `gin.eps`
    /// (`1 x 3`), `readout.pool` (`1 x 1`, 0 = sum, 1 = mean), then the
    /// trainable tensors in [`GinParams::init`] order.
    pub fn to_tensors(&self) -> Vec<Tensor> {
        let row = |name: &str, v: Vec<f64>| Tensor::new(name, vec![1, v.len()], v);
        let mut out = vec![
            row(
                "input.shift",
                self.input_shift.iter().map(|x| x.as_f64()).collect(),
            ),
            row(
                "input.scale",
                self.input_scale.iter().map(|x| x.as_f64()).collect(),
            ),
            row("gin.eps", self.eps.iter().map(|x| x.as_f64()).collect()),
            row(
                "readout.pool",
                vec![f64::from(u8::from(self.pooling == Pooling::Mean))],
            ),
        ];
        out.extend(self.weights.to_tensors());
        out
    }

    pub fn from_tensors(tensors: &[Tensor]) -> Result<Self> {
        let mut p = Self::init(0);
        let find = |name: &str, len: usize| -> Result<Vec<T>> {
            let t = tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::Format(format!("missing tensor {name}")))?;
            if t.data.len() != len {
                return Err(Error::ShapeMismatch(format!(
                    "tensor {name} has {} values",
                    t.data.len()
                )));
            }
            Ok(t.data.iter().map(|&x| T::of(x)).collect())
        };
        p.input_shift = find("input.shift", NODE_FEATURES)?;
        p.input_scale = find("input.scale", NODE_FEATURES)?;
        let eps = find("gin.eps", GIN_LAYERS)?;
        p.eps.copy_from_slice(&eps);
        p.pooling = if find("readout.pool", 1)?[0] == T::zero() {
            Pooling::Sum
        } else {
            Pooling::Mean
        };
        p.weights.load_from(tensors)?;
        Ok(p)
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        write_gprm(w, &self.to_tensors())
    }

    pub fn load<R: Read>(r: R) -> Result<Self> {
        Self::from_tensors(&read_gprm(r)?)
    }
}

/// Intermediate values kept for the backward pass.
struct Cache<T> {
    neighbors: Vec<Vec<usize>>,
    layers: Vec<LayerCache<T>>,
    top: TopCache<T>,
}

/// Aggregated input, first pre-activation, its relu, second pre-activation.
struct LayerCache<T> {
    z: Matrix<T>,
    p1: Matrix<T>,
    q1: Matrix<T>,
    p2: Matrix<T>,
}

struct TopCache<T> {
    pooled: Matrix<T>,
    r1: Matrix<T>,
    s1: Matrix<T>,
    embedding: Matrix<T>,
    logits: Matrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GinOutput<T> {
    pub embedding: Vec<T>,
    pub logits: [T; N_CLASSES],
}

impl<T: Scalar> GinOutput<T> {
    pub fn probabilities(&self) -> Vec<T> {
        softmax_row(&self.logits)
    }
}

fn aggregate<T: Scalar>(h: &Matrix<T>, neighbors: &[Vec<usize>], eps: T) -> Matrix<T> {
    let mut z = h.scale(T::one() + eps);
    for (v, nb) in neighbors.iter().enumerate() {
        for &u in nb {
            for c in 0..h.cols() {
                let x = h[(u, c)];
                z[(v, c)] += x;
            }
        }
    }
    z
}

fn gin_layer<T: Scalar>(
    p: &GinParams<T>,
    l: usize,
    h: &Matrix<T>,
    neighbors: &[Vec<usize>],
) -> (LayerCache<T>, Matrix<T>) {
    let k = layer_w1(l);
    let z = aggregate(h, neighbors, p.eps[l]);
    let p1 = affine(&z, p.w(k), p.w(k + 1));
    let q1 = relu(&p1);
    let p2 = affine(&q1, p.w(k + 2), p.w(k + 3));
    let out = relu(&p2);
    (LayerCache { z, p1, q1, p2 }, out)
}

fn pool<T: Scalar>(p: &GinParams<T>, h: &Matrix<T>) -> Matrix<T> {
    let mut pooled = Matrix::from_vec(1, h.cols(), h.column_sums()).expect("row shape");
    if p.pooling == Pooling::Mean {
        pooled.scale_assign(T::one() / T::of_usize(h.rows()));
    }
    pooled
}

fn top<T: Scalar>(p: &GinParams<T>, pooled: Matrix<T>) -> TopCache<T> {
    let r1 = affine(&pooled, p.w(READOUT), p.w(READOUT + 1));
    let s1 = relu(&r1);
    let embedding = affine(&s1, p.w(READOUT + 2), p.w(READOUT + 3));
    let logits = affine(&embedding, p.w(HEAD), p.w(HEAD + 1));
    TopCache {
        pooled,
        r1,
        s1,
        embedding,
        logits,
    }
}

fn forward_cached<T: Scalar>(g: &MolecularGraph, p: &GinParams<T>) -> Result<Cache<T>> {
    let n = g.n_atoms();
    if n == 0 {
        return Err(Error::ShapeMismatch("graph has no atoms".into()));
    }
    if g.node_features.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {n} atoms",
            g.node_features.len()
        )));
    }
    let mut neighbors = vec![Vec::new(); n];
    for b in &g.bonds {
        neighbors[b.a].push(b.b);
        neighbors[b.b].push(b.a);
    }
    let mut h = Matrix::from_fn(n, NODE_FEATURES, |i, k| {
        (T::of(g.node_features[i][k]) - p.input_shift[k]) * p.input_scale[k]
    });
    let mut layers = Vec::with_capacity(GIN_LAYERS);
    for l in 0..GIN_LAYERS {
        let (lc, out) = gin_layer(p, l, &h, &neighbors);
        layers.push(lc);
        h = out;
    }
    let top = top(p, pool(p, &h));
    Ok(Cache {
        neighbors,
        layers,
        top,
    })
}

/// Stage of the forward pass that a trainable tensor first affects:
/// GIN layers `0..3`, then the readout (3) and the head (4).
fn stage_of(tensor: usize) -> usize {
    if tensor < READOUT {
        tensor / 4
    } else if tensor < HEAD {
        GIN_LAYERS
    } else {
        GIN_LAYERS + 1
    }
}

/// Half the change in the logits when entry `idx` of `tensor` moves by `+h`
/// versus `-h`, pushed forward from the cached unperturbed pass. Between ReLU
/// kinks the logits are affine in a single weight, so `logits(w +- h)` is
/// exactly `logits(w) +- half`. `None` if the two steps straddle a kink.
fn half_difference(
    p: &GinParams<f64>,
    base: &Cache<f64>,
    tensor: usize,
    idx: usize,
    h: f64,
) -> Option<Matrix<f64>> {
    let cols = p.w(tensor).cols();
    let (a, b) = (idx / cols, idx % cols);
    let is_weight = tensor.is_multiple_of(2);
    // Change of the pre-activation that `tensor` writes, given that map's input.
    let seed = |input: &Matrix<f64>| {
        let mut d = Matrix::zeros(input.rows(), cols);
        for i in 0..input.rows() {
            d[(i, b)] = if is_weight { h * input[(i, a)] } else { h };
        }
        d
    };
    let t = &base.top;
    let stage = stage_of(tensor);
    let d_emb = if stage < GIN_LAYERS {
        let lc = &base.layers[stage];
        let k = layer_w1(stage);
        let dp2 = if tensor < k + 2 {
            relu_half_difference(&lc.p1, &seed(&lc.z))?.matmul(p.w(k + 2))
        } else {
            seed(&lc.q1)
        };
        let mut dh = relu_half_difference(&lc.p2, &dp2)?;
        for l in stage + 1..GIN_LAYERS {
            let lc = &base.layers[l];
            let k = layer_w1(l);
            let dz = aggregate(&dh, &base.neighbors, p.eps[l]);
            let dq1 = relu_half_difference(&lc.p1, &dz.matmul(p.w(k)))?;
            dh = relu_half_difference(&lc.p2, &dq1.matmul(p.w(k + 2)))?;
        }
        let dr1 = pool(p, &dh).matmul(p.w(READOUT));
        relu_half_difference(&t.r1, &dr1)?.matmul(p.w(READOUT + 2))
    } else if tensor < READOUT + 2 {
        relu_half_difference(&t.r1, &seed(&t.pooled))?.matmul(p.w(READOUT + 2))
    } else if tensor < HEAD {
        seed(&t.s1)
    } else {
        return Some(seed(&t.embedding));
    };
    Some(d_emb.matmul(p.w(HEAD)))
}

pub fn gin_forward<T: Scalar>(g: &MolecularGraph, p: &GinParams<T>) -> Result<GinOutput<T>> {
    let c = forward_cached(g, p)?;
    Ok(GinOutput {
        embedding: c.top.embedding.as_slice().to_vec(),
        logits: [c.top.logits[(0, 0)], c.top.logits[(0, 1)]],
    })
}

/// Cross-entropy loss of one labelled graph and its parameter gradient.
pub fn gin_loss_grad<T: Scalar>(
    g: &MolecularGraph,
    label: u8,
    p: &GinParams<T>,
) -> Result<(T, Params<T>)> {
    let c = forward_cached(g, p)?;
    let t = &c.top;
    let (loss, dlogits) = cross_entropy(t.logits.as_slice(), label);
    let mut grads = p.weights.zeros_like();
    let gt = &mut grads.tensors;
    let dl = Matrix::from_vec(1, N_CLASSES, dlogits)?;

    gt[HEAD] = t.embedding.t_matmul(&dl);
    gt[HEAD + 1] = dl.clone();
    let demb = dl.matmul_t(p.w(HEAD));
    gt[READOUT + 2] = t.s1.t_matmul(&demb);
    gt[READOUT + 3] = demb.clone();
    let dr1 = relu_backward(&demb.matmul_t(p.w(READOUT + 2)), &t.r1);
    gt[READOUT] = t.pooled.t_matmul(&dr1);
    gt[READOUT + 1] = dr1.clone();
    let mut dpooled = dr1.matmul_t(p.w(READOUT));

    let n = g.n_atoms();
    if p.pooling == Pooling::Mean {
        dpooled.scale_assign(T::one() / T::of_usize(n));
    }
    let mut dh = Matrix::from_fn(n, GIN_HIDDEN, |_, j| dpooled[(0, j)]);
    for l in (0..GIN_LAYERS).rev() {
        let k = layer_w1(l);
        let lc = &c.layers[l];
        let dp2 = relu_backward(&dh, &lc.p2);
        gt[k + 2] = lc.q1.t_matmul(&dp2);
        gt[k + 3] = Matrix::from_vec(1, GIN_HIDDEN, dp2.column_sums())?;
        let dp1 = relu_backward(&dp2.matmul_t(p.w(k + 2)), &lc.p1);
        gt[k] = lc.z.t_matmul(&dp1);
        gt[k + 1] = Matrix::from_vec(1, GIN_HIDDEN, dp1.column_sums())?;
        if l > 0 {
            let dz = dp1.matmul_t(p.w(k));
            // The aggregation is symmetric, so its adjoint has the same form.
            dh = aggregate(&dz, &c.neighbors, p.eps[l]);
        }
    }
    Ok((loss, grads))
}

/// Mean loss and gradient over a batch; per-graph work runs in parallel and is
/// reduced in input order.
pub fn batch_loss_grad<T: Scalar>(
    graphs: &[&MolecularGraph],
    labels: &[u8],
    p: &GinParams<T>,
) -> Result<(T, Params<T>)> {
    let parts = graphs
        .par_iter()
        .zip(labels.par_iter())
        .map(|(g, &y)| gin_loss_grad(g, y, p))
        .collect::<Result<Vec<_>>>()?;
    let mut total = p.weights.zeros_like();
    let mut loss = T::zero();
    for (l, gr) in &parts {
        loss += *l;
        total.add_assign(gr);
    }
    let inv = T::one() / T::of_usize(graphs.len().max(1));
    total.scale_assign(inv);
    Ok((loss * inv, total))
}

pub fn mean_loss<T: Scalar>(
    graphs: &[MolecularGraph],
    labels: &[u8],
    p: &GinParams<T>,
) -> Result<T> {
    let losses = graphs
        .par_iter()
        .zip(labels.par_iter())
        .map(|(g, &y)| {
            let out = gin_forward(g, p)?;
            Ok(cross_entropy(&out.logits, y).0)
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(losses.iter().copied().sum::<T>() / T::of_usize(losses.len().max(1)))
}

/// Embeddings for many graphs, one row each, in input order.
pub fn embed_all<T: Scalar>(graphs: &[MolecularGraph], p: &GinParams<T>) -> Result<Matrix<T>> {
    let rows = graphs
        .par_iter()
        .map(|g| gin_forward(g, p).map(|o| o.embedding))
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_vec(graphs.len(), EMBED_DIM, rows.concat())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    /// 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    pub pooling: Pooling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig {
                lr: 1e-3,
                ..AdamConfig::default()
            },
            epochs: 200,
            batch_size: 0,
            seed: 0,
            patience: Some(20),
            pooling: Pooling::Sum,
        }
    }
}

/// Adam on mean cross-entropy; returns the parameters with the lowest
/// validation loss seen, counting the initial parameters as epoch 0.
pub fn train_gin<T: Scalar>(
    train: &[MolecularGraph],
    ytrain: &[u8],
    val: &[MolecularGraph],
    yval: &[u8],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<GinParams<T>>> {
    if train.len() != ytrain.len() || val.len() != yval.len() {
        return Err(Error::ShapeMismatch("graph and label counts differ".into()));
    }
    crate::nn::check_nonempty(ytrain, "training")?;
    crate::nn::check_nonempty(yval, "validation")?;
    let n_pos = ytrain.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == ytrain.len() {
        return Err(Error::DegenerateLabels);
    }
    if cfg.epochs == 0 {
        return Err(Error::Config("epochs must be at least 1".into()));
    }
    let mut params = GinParams::<T>::init(cfg.seed);
    params.pooling = cfg.pooling;
    params.fit_input_scaling(train);

    let mut adam = Adam::new(cfg.adam, &params.weights);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0001);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = if cfg.batch_size == 0 {
        train.len()
    } else {
        cfg.batch_size
    };

    let mut best = params.clone();
    let mut best_val = mean_loss(val, yval, &params)?.as_f64();
    let mut best_epoch = 0;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        if batch < train.len() {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let gs: Vec<&MolecularGraph> = chunk.iter().map(|&i| &train[i]).collect();
            let ys: Vec<u8> = chunk.iter().map(|&i| ytrain[i]).collect();
            let (loss, grads) = batch_loss_grad(&gs, &ys, &params)?;
            epoch_loss += loss.as_f64() * chunk.len() as f64;
            adam.step(&mut params.weights, &grads);
        }
        let val_loss = mean_loss(val, yval, &params)?.as_f64();
        log.push(EpochLog {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_loss,
        });
        if val_loss < best_val {
            best_val = val_loss;
            best = params.clone();
            best_epoch = epoch;
        } else if cfg.patience.is_some_and(|p| epoch - best_epoch > p) {
            break;
        }
    }
    Ok(TrainOutcome {
        params: best,
        best_epoch,
        best_val_loss: best_val,
        log,
    })
}

/// Compares [`gin_loss_grad`] against central differences with step `h`.
pub fn grad_check(p: &GinParams<f64>, g: &MolecularGraph, label: u8, h: f64) -> Result<GradCheck> {
    let (_, analytic) = gin_loss_grad(g, label, p)?;
    let base = forward_cached(g, p)?;
    let logits = base.top.logits.as_slice();
    Ok(finite_difference_check(&analytic, h, |tensor, idx| {
        half_difference(p, &base, tensor, idx, h)
            .map(|d| cross_entropy_difference(logits, d.as_slice(), label))
    }))
}
