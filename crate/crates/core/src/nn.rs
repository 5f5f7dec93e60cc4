//! Building blocks shared by the graph networks: named parameter sets, Adam,
//! initialization and the two-class softmax loss.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::Tensor;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Ordered, named list of trainable tensors. Biases are `1 x d` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub names: Vec<String>,
    pub tensors: Vec<Matrix<T>>,
}

impl<T: Scalar> Params<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, m: Matrix<T>) {
        self.names.push(name.into());
        self.tensors.push(m);
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Matrix::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale_assign(&mut self, s: T) {
        for t in self.tensors.iter_mut() {
            t.scale_assign(s);
        }
    }

    pub fn norm(&self) -> T {
        self.tensors
            .iter()
            .flat_map(|t| t.as_slice().iter())
            .map(|&x| x * x)
            .sum::<T>()
            .sqrt()
    }

    pub fn n_values(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::is_finite)
    }

    /// Flat accessors used by finite-difference checks.
    pub fn get_flat(&self, mut k: usize) -> T {
        for t in &self.tensors {
            if k < t.len() {
                return t.as_slice()[k];
            }
            k -= t.len();
        }
        panic!("flat index out of range")
    }

    pub fn set_flat(&mut self, mut k: usize, v: T) {
        for t in self.tensors.iter_mut() {
            if k < t.len() {
                t.as_mut_slice()[k] = v;
                return;
            }
            k -= t.len();
        }
        panic!("flat index out of range")
    }

    pub fn to_tensors(&self) -> Vec<Tensor> {
        self.names
            .iter()
            .zip(&self.tensors)
            .map(|(n, t)| {
                Tensor::new(
                    n.clone(),
                    vec![t.rows(), t.cols()],
                    t.as_slice().iter().map(|x| x.as_f64()).collect(),
                )
            })
            .collect()
    }

    /// Loads tensors by name; shapes must match `self`.
    pub fn load_from(&mut self, tensors: &[Tensor]) -> Result<()> {
        for (name, slot) in self.names.iter().zip(self.tensors.iter_mut()) {
            let t = tensors
                .iter()
                .find(|t| &t.name == name)
                .ok_or_else(|| Error::Format(format!("missing tensor {name}")))?;
            if t.dims != [slot.rows(), slot.cols()] {
                return Err(Error::ShapeMismatch(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    t.dims,
                    slot.shape()
                )));
            }
            *slot = Matrix::from_vec(
                slot.rows(),
                slot.cols(),
                t.data.iter().map(|&x| T::of(x)).collect(),
            )?;
        }
        Ok(())
    }
}

impl<T: Scalar> Default for Params<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Glorot-uniform weights.
pub fn glorot<T: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| T::of(rng.gen_range(-limit..limit)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty added to the gradient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adam<T> {
    cfg: AdamConfig,
    m: Params<T>,
    v: Params<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig, like: &Params<T>) -> Self {
        Self {
            cfg,
            m: like.zeros_like(),
            v: like.zeros_like(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut Params<T>, grads: &Params<T>) {
        self.t += 1;
        let c = &self.cfg;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let lr = T::of(c.lr);
        let eps = T::of(c.eps);
        let wd = T::of(c.weight_decay);
        let bc1 = T::one() - b1.powi(self.t);
        let bc2 = T::one() - b2.powi(self.t);
        for (k, p) in params.tensors.iter_mut().enumerate() {
            let g = grads.tensors[k].as_slice();
            let m = self.m.tensors[k].as_mut_slice();
            let v = self.v.tensors[k].as_mut_slice();
            for (i, w) in p.as_mut_slice().iter_mut().enumerate() {
                let gi = g[i] + wd * *w;
                m[i] = b1 * m[i] + (T::one() - b1) * gi;
                v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                *w -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

pub fn relu<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    m.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// Multiplies `grad` by the ReLU derivative at `pre` (0 at the kink).
pub fn relu_backward<T: Scalar>(grad: &Matrix<T>, pre: &Matrix<T>) -> Matrix<T> {
    Matrix::from_fn(grad.rows(), grad.cols(), |i, j| {
        if pre[(i, j)] > T::zero() {
            grad[(i, j)]
        } else {
            T::zero()
        }
    })
}

/// Affine map `x W + b` with `b` a `1 x d` row.
pub fn affine<T: Scalar>(x: &Matrix<T>, w: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let mut out = x.matmul(w);
    out.add_row(b.as_slice());
    out
}

pub fn softmax_row<T: Scalar>(z: &[T]) -> Vec<T> {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of one row of logits and its gradient w.r.t. the logits.
pub fn cross_entropy<T: Scalar>(logits: &[T], label: u8) -> (T, Vec<T>) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
    let loss = lse - logits[usize::from(label)];
    let mut grad = softmax_row(logits);
    grad[usize::from(label)] -= T::one();
    (loss, grad)
}

/// Half-difference through a ReLU. `pre` is the unperturbed pre-activation
/// and `d` half the change between the `+h` and `-h` evaluations. Returns
/// `None` if some entry lies on different sides of the kink at `+h` and `-h`.
pub fn relu_half_difference(pre: &Matrix<f64>, d: &Matrix<f64>) -> Option<Matrix<f64>> {
    let mut out = d.clone();
    for (o, (&x, &dx)) in out
        .as_mut_slice()
        .iter_mut()
        .zip(pre.as_slice().iter().zip(d.as_slice()))
    {
        let up = x + dx > 0.0;
        if up != (x - dx > 0.0) {
            return None;
        }
        if !up {
            *o = 0.0;
        }
    }
    Some(out)
}

fn softplus_difference_nonpos(u: f64, v: f64) -> f64 {
    // u <= 0, v >= 0
    (2.0 * u.exp() * v.sinh() / (1.0 + (u - v).exp())).ln_1p()
}

/// `CE(z + d) - CE(z - d)` for two-class logits, evaluated without
/// subtracting two nearly equal losses.
pub fn cross_entropy_difference(z: &[f64], d: &[f64], label: u8) -> f64 {
    assert_eq!(z.len(), 2, "two-class logits");
    let (l, o) = (usize::from(label), 1 - usize::from(label));
    // CE = softplus(u) with u the margin of the other class.
    let u = z[o] - z[l];
    let v = d[o] - d[l];
    let (sign, v) = if v < 0.0 { (-1.0, -v) } else { (1.0, v) };
    let diff = if u <= 0.0 {
        softplus_difference_nonpos(u, v)
    } else {
        2.0 * v - softplus_difference_nonpos(-u, v)
    };
    sign * diff
}

/// Result of comparing analytic gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

/// Floor on the denominator of the relative error, so entries whose
/// gradient is zero on both sides compare in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-8;

/// Central-difference check of every flat parameter.
///
/// `diff(tensor, idx)` returns `L(w + h e) - L(w - h e)` for that entry, or
/// `None` when the two evaluations sit on different sides of a ReLU kink.
pub fn finite_difference_check(
    analytic: &Params<f64>,
    h: f64,
    mut diff: impl FnMut(usize, usize) -> Option<f64>,
) -> GradCheck {
    let mut out = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    for (t, tensor) in analytic.tensors.iter().enumerate() {
        for (i, &a) in tensor.as_slice().iter().enumerate() {
            let Some(d) = diff(t, i) else {
                out.skipped_kinks += 1;
                continue;
            };
            let numeric = d / (2.0 * h);
            let abs = (numeric - a).abs();
            let rel = abs / numeric.abs().max(a.abs()).max(GRAD_CHECK_FLOOR);
            out.max_abs_error = out.max_abs_error.max(abs);
            out.max_rel_error = out.max_rel_error.max(rel);
            out.checked += 1;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<P> {
    pub params: P,
    /// Epoch of the returned checkpoint; 0 means the initial parameters.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub log: Vec<EpochLog>,
}

pub(crate) fn check_nonempty<X>(labels: &[X], what: &str) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::DegenerateSplit(format!("{what} set is empty")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    #[test]
    fn cross_entropy_is_consistent() {
        let (l, g) = cross_entropy(&[2.0f64, -1.0], 0);
        let p = softmax_row(&[2.0f64, -1.0]);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        assert!((l + p[0].ln()).abs() < 1e-12);
        assert!((g[0] - (p[0] - 1.0)).abs() < 1e-12 && (g[1] - p[1]).abs() < 1e-12);
        let (big, _) = cross_entropy(&[1000.0f64, -1000.0], 1);
        assert!(big.is_finite() && big > 0.0);
    }

    #[test]
    fn cross_entropy_difference_matches_direct_evaluation() {
        for &(z0, z1, d0, d1) in &[
            (2.0, -1.0, 0.3, -0.1),
            (-4.0, 3.0, -0.2, 0.5),
            (0.0, 0.0, 1.0, 0.0),
            (30.0, -30.0, 0.01, 0.02),
        ] {
            for label in 0..2u8 {
                let plus = cross_entropy(&[z0 + d0, z1 + d1], label).0;
                let minus = cross_entropy(&[z0 - d0, z1 - d1], label).0;
                let got = cross_entropy_difference(&[z0, z1], &[d0, d1], label);
                assert!(
                    (got - (plus - minus)).abs() < 1e-12,
                    "{got} vs {}",
                    plus - minus
                );
            }
        }
        // Small steps keep full relative accuracy.
        let got = cross_entropy_difference(&[0.4, -0.2], &[1e-9, 0.0], 0);
        let p1 = softmax_row(&[0.4f64, -0.2])[0];
        assert!((got / 1e-9 - 2.0 * (p1 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn relu_half_difference_flags_kinks() {
        let pre = Matrix::from_rows(&[vec![1.0, -1.0, 0.05]]).unwrap();
        let ok = relu_half_difference(&pre, &Matrix::from_rows(&[vec![0.1, 0.1, 0.01]]).unwrap())
            .unwrap();
        assert_eq!(ok.as_slice(), &[0.1, 0.0, 0.01]);
        assert!(
            relu_half_difference(&pre, &Matrix::from_rows(&[vec![0.1, 0.1, 0.1]]).unwrap())
                .is_none()
        );
    }

    #[test]
    fn adam_with_zero_rate_is_a_no_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = Params::new();
        p.push("w", glorot::<f64>(&mut rng, 3, 2));
        let before = p.clone();
        let mut g = p.zeros_like();
        g.tensors[0].as_mut_slice().fill(1.0);
        let mut adam = Adam::new(
            AdamConfig {
                lr: 0.0,
                ..AdamConfig::default()
            },
            &p,
        );
        for _ in 0..5 {
            adam.step(&mut p, &g);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn weight_decay_shrinks_the_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = Params::new();
        p.push("w", glorot::<f64>(&mut rng, 8, 8));
        let zero = p.zeros_like();
        let mut adam = Adam::new(
            AdamConfig {
                lr: 1e-3,
                weight_decay: 1e-2,
                ..AdamConfig::default()
            },
            &p,
        );
        let mut last = p.norm();
        for _ in 0..50 {
            adam.step(&mut p, &zero);
            let now = p.norm();
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn flat_indexing_and_tensor_roundtrip() {
        let mut p = Params::new();
        p.push("a", Matrix::<f64>::from_fn(2, 2, |i, j| (i * 2 + j) as f64));
        p.push("b", Matrix::<f64>::from_fn(1, 3, |_, j| 10.0 + j as f64));
        assert_eq!(p.get_flat(3), 3.0);
        assert_eq!(p.get_flat(5), 11.0);
        p.set_flat(6, -1.0);
        let mut q = p.zeros_like();
        q.load_from(&p.to_tensors()).unwrap();
        assert_eq!(p, q);
    }
}
