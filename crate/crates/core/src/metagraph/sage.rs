//! Two-layer GraphSAGE with kernel-weighted mean aggregation.
//!
//! Layer 1: `relu([h | A h] W1 + b1)` to 128, then dropout. Layer 2:
//! `[h | A h] W2 + b2` to 64. Classifier: affine 64 to 2. `A` is the kernel
//! matrix with a zero diagonal and unit row sums.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MetaGraph, NodeMask};
use crate::error::{Error, Result};
use crate::io::{read_gprm, write_gprm, Tensor};
use crate::linalg::Matrix;
use crate::nn::{
    affine, check_nonempty, cross_entropy, cross_entropy_difference, finite_difference_check,
    glorot, relu, relu_backward, relu_half_difference, Adam, AdamConfig, EpochLog, GradCheck,
    Params, TrainOutcome,
};
use crate::scalar::Scalar;

pub const SAGE_HIDDEN1: usize = 128;
pub const SAGE_HIDDEN2: usize = 64;
const N_CLASSES: usize = 2;

const W1: usize = 0;
const W2: usize = 2;
const WC: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct SageParams<T> {
    pub dropout: T,
    /// `sage1.w, sage1.b, sage2.w, sage2.b, classifier.w, classifier.b`.
    pub weights: Params<T>,
}

impl<T: Scalar> SageParams<T> {
    /// Glorot weights and zero biases for `in_dim` node features.
    pub fn init(in_dim: usize, dropout: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Params::new();
        w.push("sage1.w", glorot(&mut rng, 2 * in_dim, SAGE_HIDDEN1));
        w.push("sage1.b", Matrix::zeros(1, SAGE_HIDDEN1));
        w.push("sage2.w", glorot(&mut rng, 2 * SAGE_HIDDEN1, SAGE_HIDDEN2));
        w.push("sage2.b", Matrix::zeros(1, SAGE_HIDDEN2));
        w.push("classifier.w", glorot(&mut rng, SAGE_HIDDEN2, N_CLASSES));
        w.push("classifier.b", Matrix::zeros(1, N_CLASSES));
        Self {
            dropout: T::of(dropout),
            weights: w,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.tensors[W1].rows() / 2
    }

    fn w(&self, k: usize) -> &Matrix<T> {
        &self.weights.tensors[k]
    }

    pub fn to_tensors(&self) -> Vec<Tensor> {
        let mut out = vec![Tensor::new(
            "sage.dropout",
            vec![1],
            vec![self.dropout.as_f64()],
        )];
        out.extend(self.weights.to_tensors());
        out
    }

    pub fn from_tensors(tensors: &[Tensor]) -> Result<Self> {
        let dropout = tensors
            .iter()
            .find(|t| t.name == "sage.dropout" && t.data.len() == 1)
            .ok_or_else(|| Error::Format("missing tensor sage.dropout".into()))?
            .data[0];
        let w1 = tensors
            .iter()
            .find(|t| t.name == "sage1.w")
            .ok_or_else(|| Error::Format("missing tensor sage1.w".into()))?;
        if w1.dims.len() != 2 || w1.dims[0] % 2 != 0 {
            return Err(Error::ShapeMismatch(format!(
                "sage1.w has shape {:?}",
                w1.dims
            )));
        }
        let mut p = Self::init(w1.dims[0] / 2, dropout, 0);
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

/// Row-normalized aggregation matrix and the fixed first-layer input
/// `[X | A X]`.
#[derive(Clone, Debug)]
pub struct SageInput<T> {
    pub transition: Matrix<T>,
    pub concat: Matrix<T>,
}

impl<T: Scalar> SageInput<T> {
    /// `top_k` keeps only the `k` heaviest neighbours of each node (ties to
    /// the lower index); `None` aggregates over all other nodes.
    pub fn new(mg: &MetaGraph<T>, top_k: Option<usize>) -> Result<Self> {
        let n = mg.n();
        if mg.weights.shape() != (n, n) {
            return Err(Error::ShapeMismatch(format!(
                "{:?} weights for {n} nodes",
                mg.weights.shape()
            )));
        }
        if top_k == Some(0) {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            let mut nb: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            if let Some(k) = top_k {
                nb.sort_by(|&x, &y| {
                    mg.weights[(i, y)]
                        .partial_cmp(&mg.weights[(i, x)])
                        .unwrap()
                        .then(x.cmp(&y))
                });
                nb.truncate(k);
            }
            let total: T = nb.iter().map(|&j| mg.weights[(i, j)]).sum();
            if total > T::zero() {
                for &j in &nb {
                    a[(i, j)] = mg.weights[(i, j)] / total;
                }
            }
        }
        let concat = mg.features.hcat(&a.matmul(&mg.features))?;
        Ok(Self {
            transition: a,
            concat,
        })
    }

    pub fn n(&self) -> usize {
        self.transition.rows()
    }
}

struct Cache<T> {
    p1: Matrix<T>,
    /// Inverted-dropout multipliers, when dropout is active.
    keep: Option<Matrix<T>>,
    c2: Matrix<T>,
    p2: Matrix<T>,
    logits: Matrix<T>,
}

fn concat_agg<T: Scalar>(a: &Matrix<T>, h: &Matrix<T>) -> Matrix<T> {
    h.hcat(&a.matmul(h)).expect("row counts agree")
}

fn forward<T: Scalar>(
    input: &SageInput<T>,
    p: &SageParams<T>,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Cache<T>> {
    if input.concat.cols() != p.w(W1).rows() {
        return Err(Error::ShapeMismatch(format!(
            "node features have {} columns, model expects {}",
            input.concat.cols() / 2,
            p.in_dim()
        )));
    }
    let p1 = affine(&input.concat, p.w(W1), p.w(W1 + 1));
    let mut h1 = relu(&p1);
    let keep = rng.map(|rng| {
        let rate = p.dropout;
        let scale = T::one() / (T::one() - rate);
        Matrix::from_fn(h1.rows(), h1.cols(), |_, _| {
            if T::of(rng.gen::<f64>()) < rate {
                T::zero()
            } else {
                scale
            }
        })
    });
    if let Some(k) = &keep {
        for (h, &m) in h1.as_mut_slice().iter_mut().zip(k.as_slice()) {
            *h *= m;
        }
    }
    let c2 = concat_agg(&input.transition, &h1);
    let p2 = affine(&c2, p.w(W2), p.w(W2 + 1));
    let logits = affine(&p2, p.w(WC), p.w(WC + 1));
    Ok(Cache {
        p1,
        keep,
        c2,
        p2,
        logits,
    })
}

/// Logits for every node. `dropout_seed` switches dropout on with that seed.
pub fn sage_forward<T: Scalar>(
    mg: &MetaGraph<T>,
    p: &SageParams<T>,
    top_k: Option<usize>,
    dropout_seed: Option<u64>,
) -> Result<Matrix<T>> {
    let input = SageInput::new(mg, top_k)?;
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    Ok(forward(&input, p, rng.as_mut())?.logits)
}

/// Mean cross-entropy over `nodes`, gradients, and the node logits.
fn loss_grad_cached<T: Scalar>(
    input: &SageInput<T>,
    labels: &[u8],
    nodes: &[usize],
    p: &SageParams<T>,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(T, Params<T>, Matrix<T>)> {
    if labels.len() != input.n() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} nodes",
            labels.len(),
            input.n()
        )));
    }
    if nodes.is_empty() {
        return Err(Error::DegenerateSplit("no nodes in the loss".into()));
    }
    let c = forward(input, p, rng)?;
    let inv = T::one() / T::of_usize(nodes.len());
    let mut loss = T::zero();
    let mut dl = Matrix::zeros(input.n(), N_CLASSES);
    for &i in nodes {
        let (l, g) = cross_entropy(c.logits.row(i), labels[i]);
        loss += l * inv;
        for (d, gv) in dl.row_mut(i).iter_mut().zip(g) {
            *d += gv * inv;
        }
    }
    let mut grads = p.weights.zeros_like();
    let gt = &mut grads.tensors;
    gt[WC] = c.p2.t_matmul(&dl);
    gt[WC + 1] = Matrix::from_vec(1, N_CLASSES, dl.column_sums())?;
    let dp2 = dl.matmul_t(p.w(WC));
    gt[W2] = c.c2.t_matmul(&dp2);
    gt[W2 + 1] = Matrix::from_vec(1, SAGE_HIDDEN2, dp2.column_sums())?;
    let dc2 = dp2.matmul_t(p.w(W2));
    let dself = dc2.select_cols(&(0..SAGE_HIDDEN1).collect::<Vec<_>>());
    let dagg = dc2.select_cols(&(SAGE_HIDDEN1..2 * SAGE_HIDDEN1).collect::<Vec<_>>());
    let mut dh1 = dself;
    dh1.add_assign(&input.transition.t_matmul(&dagg));
    if let Some(k) = &c.keep {
        for (d, &m) in dh1.as_mut_slice().iter_mut().zip(k.as_slice()) {
            *d *= m;
        }
    }
    let dp1 = relu_backward(&dh1, &c.p1);
    gt[W1] = input.concat.t_matmul(&dp1);
    gt[W1 + 1] = Matrix::from_vec(1, SAGE_HIDDEN1, dp1.column_sums())?;
    Ok((loss, grads, c.logits))
}

/// Mean cross-entropy over `nodes` and its gradient. Dropout is active when
/// `dropout_seed` is set.
pub fn sage_loss_grad<T: Scalar>(
    input: &SageInput<T>,
    labels: &[u8],
    nodes: &[usize],
    p: &SageParams<T>,
    dropout_seed: Option<u64>,
) -> Result<(T, Params<T>)> {
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    let (l, g, _) = loss_grad_cached(input, labels, nodes, p, rng.as_mut())?;
    Ok((l, g))
}

fn mean_ce<T: Scalar>(logits: &Matrix<T>, labels: &[u8], nodes: &[usize]) -> T {
    nodes
        .iter()
        .map(|&i| cross_entropy(logits.row(i), labels[i]).0)
        .sum::<T>()
        / T::of_usize(nodes.len())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SageConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub dropout: f64,
    pub patience: Option<usize>,
    pub seed: u64,
    pub top_k: Option<usize>,
}

impl Default for SageConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig {
                lr: 1e-3,
                weight_decay: 1e-5,
                ..AdamConfig::default()
            },
            epochs: 1000,
            dropout: 0.5,
            patience: Some(50),
            seed: 0,
            top_k: None,
        }
    }
}

/// Transductive full-graph training on the train mask with early stopping on
/// the validation mask. Returns the best-validation checkpoint.
pub fn train_sage<T: Scalar>(
    mg: &MetaGraph<T>,
    cfg: &SageConfig,
) -> Result<TrainOutcome<SageParams<T>>> {
    let train = mg.nodes(NodeMask::Train);
    let val = mg.nodes(NodeMask::Val);
    check_nonempty(&train, "training")?;
    check_nonempty(&val, "validation")?;
    let n_pos = train.iter().filter(|&&i| mg.labels[i] == 1).count();
    if n_pos == 0 || n_pos == train.len() {
        return Err(Error::DegenerateLabels);
    }
    if cfg.epochs == 0 {
        return Err(Error::Config("epochs must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&cfg.dropout) {
        return Err(Error::Config(format!(
            "dropout {} outside [0, 1)",
            cfg.dropout
        )));
    }
    let input = SageInput::new(mg, cfg.top_k)?;
    let mut params = SageParams::<T>::init(mg.features.cols(), cfg.dropout, cfg.seed);
    let mut adam = Adam::new(cfg.adam, &params.weights);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x000d_20f0_u64);

    let mut best = params.clone();
    let mut best_val = mean_ce(&forward(&input, &params, None)?.logits, &mg.labels, &val).as_f64();
    let mut best_epoch = 0;
    let mut log = Vec::new();
    for epoch in 1..=cfg.epochs {
        let (loss, grads, _) =
            loss_grad_cached(&input, &mg.labels, &train, &params, Some(&mut rng))?;
        adam.step(&mut params.weights, &grads);
        let val_loss = mean_ce(&forward(&input, &params, None)?.logits, &mg.labels, &val).as_f64();
        log.push(EpochLog {
            epoch,
            train_loss: loss.as_f64(),
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

/// Logit changes for a perturbation of one parameter entry, obtained from an
/// unperturbed pass. A single weight only moves one column of a
/// pre-activation, so there is no need to rerun the network.
struct ColumnProbe<'a> {
    input: &'a SageInput<f64>,
    p: &'a SageParams<f64>,
    base: Cache<f64>,
    /// Logit response to a unit change in each column of the layer-2 input.
    through: Vec<[f64; N_CLASSES]>,
}

impl<'a> ColumnProbe<'a> {
    fn new(input: &'a SageInput<f64>, p: &'a SageParams<f64>) -> Result<Self> {
        let base = forward(input, p, None)?;
        let (w2, wc) = (p.w(W2), p.w(WC));
        let through = (0..w2.rows())
            .map(|row| {
                let mut out = [0.0; N_CLASSES];
                for (k, o) in out.iter_mut().enumerate() {
                    *o = (0..SAGE_HIDDEN2).map(|m| w2[(row, m)] * wc[(m, k)]).sum();
                }
                out
            })
            .collect();
        Ok(Self {
            input,
            p,
            base,
            through,
        })
    }

    /// Half the logit change between moving entry `idx` of `tensor` by `+h`
    /// and by `-h`; `None` if the two steps straddle a ReLU kink.
    fn half_logits(&self, tensor: usize, idx: usize, h: f64) -> Option<Matrix<f64>> {
        let (input, base) = (self.input, &self.base);
        let n = input.n();
        let cols = self.p.weights.tensors[tensor].cols();
        let (r, col) = (idx / cols, idx % cols);
        let is_weight = tensor.is_multiple_of(2);
        let mut d = Matrix::zeros(n, N_CLASSES);
        match tensor {
            W1 | 1 => {
                let pre = Matrix::from_fn(n, 1, |i, _| base.p1[(i, col)]);
                let dp = Matrix::from_fn(n, 1, |i, _| {
                    if is_weight {
                        h * input.concat[(i, r)]
                    } else {
                        h
                    }
                });
                let dh = relu_half_difference(&pre, &dp)?.into_vec();
                let dagg = input.transition.matvec(&dh);
                let (us, ua) = (self.through[col], self.through[SAGE_HIDDEN1 + col]);
                for i in 0..n {
                    for k in 0..N_CLASSES {
                        d[(i, k)] = dh[i] * us[k] + dagg[i] * ua[k];
                    }
                }
            }
            W2 | 3 => {
                let wc = self.p.w(WC);
                for i in 0..n {
                    let dp = if is_weight { h * base.c2[(i, r)] } else { h };
                    for k in 0..N_CLASSES {
                        d[(i, k)] = dp * wc[(col, k)];
                    }
                }
            }
            _ => {
                for i in 0..n {
                    d[(i, col)] = if is_weight { h * base.p2[(i, r)] } else { h };
                }
            }
        }
        Some(d)
    }
}

/// Compares [`sage_loss_grad`] (dropout off) against central differences.
pub fn sage_grad_check(
    input: &SageInput<f64>,
    labels: &[u8],
    nodes: &[usize],
    p: &SageParams<f64>,
    h: f64,
) -> Result<GradCheck> {
    let (_, analytic, _) = loss_grad_cached(input, labels, nodes, p, None)?;
    let probe = ColumnProbe::new(input, p)?;
    let logits = &probe.base.logits;
    let scale = 1.0 / nodes.len() as f64;
    Ok(finite_difference_check(&analytic, h, |t, i| {
        let d = probe.half_logits(t, i, h)?;
        let total: f64 = nodes
            .iter()
            .map(|&v| cross_entropy_difference(logits.row(v), d.row(v), labels[v]))
            .sum();
        Some(total * scale)
    }))
}

#[cfg(test)]
mod tests {
    use rand::seq::SliceRandom;

    use super::*;

    fn random_graph(n: usize, f: usize, seed: u64) -> MetaGraph<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_fn(n, f, |_, _| rng.gen_range(-1.0..1.0));
        let labels = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let masks = (0..n)
            .map(|i| match i % 5 {
                0..=2 => NodeMask::Train,
                3 => NodeMask::Val,
                _ => NodeMask::Test,
            })
            .collect();
        MetaGraph::build(x, labels, masks).unwrap()
    }

    fn randomized(in_dim: usize, seed: u64) -> SageParams<f64> {
        let mut p = SageParams::init(in_dim, 0.5, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        for k in [W1 + 1, W2 + 1, WC + 1] {
            for b in p.weights.tensors[k].as_mut_slice() {
                *b = rng.gen_range(-0.1..0.1);
            }
        }
        p
    }

    #[test]
    fn identical_nodes_give_identical_logits() {
        let x = Matrix::from_rows(&[vec![0.3, -1.0, 2.0], vec![0.3, -1.0, 2.0]]).unwrap();
        let w = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let mg = MetaGraph::from_parts(x, w, 1.0, vec![0, 1], vec![NodeMask::Train; 2]).unwrap();
        let logits = sage_forward(&mg, &randomized(3, 1), None, None).unwrap();
        assert_eq!(logits.row(0), logits.row(1));
    }

    #[test]
    fn equal_weights_aggregate_the_plain_mean() {
        let mut mg = random_graph(6, 4, 2);
        mg.weights = Matrix::from_fn(6, 6, |_, _| 0.4);
        let input = SageInput::new(&mg, None).unwrap();
        for i in 0..6 {
            for c in 0..4 {
                let mean = (0..6)
                    .filter(|&j| j != i)
                    .map(|j| mg.features[(j, c)])
                    .sum::<f64>()
                    / 5.0;
                assert!((input.concat[(i, 4 + c)] - mean).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn top_k_keeps_heaviest_neighbours() {
        let mg = random_graph(8, 5, 3);
        let input = SageInput::new(&mg, Some(2)).unwrap();
        for i in 0..8 {
            let kept: Vec<usize> = (0..8).filter(|&j| input.transition[(i, j)] > 0.0).collect();
            assert_eq!(kept.len(), 2);
            let lightest_kept = kept
                .iter()
                .map(|&j| mg.weights[(i, j)])
                .fold(f64::INFINITY, f64::min);
            for j in (0..8).filter(|j| *j != i && !kept.contains(j)) {
                assert!(mg.weights[(i, j)] <= lightest_kept);
            }
            assert!((input.transition.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_without_dropout_is_deterministic() {
        let mg = random_graph(10, 6, 4);
        let p = randomized(6, 4);
        let a = sage_forward(&mg, &p, None, None).unwrap();
        let b = sage_forward(&mg, &p, None, None).unwrap();
        assert_eq!(a, b);
        let c = sage_forward(&mg, &p, None, Some(1)).unwrap();
        assert_ne!(a, c);
        assert_eq!(c, sage_forward(&mg, &p, None, Some(1)).unwrap());
    }

    #[test]
    fn relabeling_permutes_logits() {
        let mg = random_graph(12, 5, 5);
        let p = randomized(5, 5);
        let base = sage_forward(&mg, &p, None, None).unwrap();
        let mut perm: Vec<usize> = (0..12).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(6));
        let permuted = MetaGraph::from_parts(
            mg.features.select_rows(&perm),
            Matrix::from_fn(12, 12, |i, j| mg.weights[(perm[i], perm[j])]),
            mg.sigma,
            perm.iter().map(|&i| mg.labels[i]).collect(),
            perm.iter().map(|&i| mg.masks[i]).collect(),
        )
        .unwrap();
        let out = sage_forward(&permuted, &p, None, None).unwrap();
        for (i, &src) in perm.iter().enumerate() {
            for k in 0..2 {
                assert!((out[(i, k)] - base[(src, k)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_check_dense_and_sparse() {
        for (seed, top_k) in [(8, None), (9, Some(3))] {
            let mg = random_graph(15, 10, seed);
            let input = SageInput::new(&mg, top_k).unwrap();
            let p = randomized(10, seed);
            let r =
                sage_grad_check(&input, &mg.labels, &mg.nodes(NodeMask::Train), &p, 1e-5).unwrap();
            assert!(r.checked > p.weights.n_values() / 2);
            assert!(r.max_rel_error < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn column_probe_matches_a_full_forward() {
        let mg = random_graph(9, 4, 10);
        let input = SageInput::new(&mg, None).unwrap();
        let p = randomized(4, 10);
        let probe = ColumnProbe::new(&input, &p).unwrap();
        let mut compared = 0;
        for tensor in 0..6 {
            for idx in [0, 1, 7] {
                let idx = idx % p.weights.tensors[tensor].len();
                let Some(d) = probe.half_logits(tensor, idx, 0.05) else {
                    continue;
                };
                for sign in [1.0, -1.0] {
                    let mut q = p.clone();
                    q.weights.tensors[tensor].as_mut_slice()[idx] += sign * 0.05;
                    let full = forward(&input, &q, None).unwrap().logits;
                    let fast = probe.base.logits.add(&d.scale(sign));
                    assert!(
                        full.max_abs_diff(&fast) < 1e-12,
                        "tensor {tensor} idx {idx}"
                    );
                }
                compared += 1;
            }
        }
        assert!(compared >= 8, "{compared}");
    }

    #[test]
    fn gprm_roundtrip() {
        let p = randomized(7, 11);
        let mut buf = Vec::new();
        p.save(&mut buf).unwrap();
        assert_eq!(SageParams::<f64>::load(&buf[..]).unwrap(), p);
    }
}
