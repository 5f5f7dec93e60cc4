use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::io::{read_gprm, write_gprm, Tensor};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRegConfig {
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            l2: 1e-2,
            max_iter: 20_000,
            tol: 1e-6,
        }
    }
}

/// Logistic model in the original feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRegModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub l2: T,
    pub iterations: usize,
    pub grad_norm: T,
}

impl<T: Scalar> LogRegModel<T> {
    pub fn predict_proba(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        if x.cols() != self.weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "model has {} weights, features have {} columns",
                self.weights.len(),
                x.cols()
            )));
        }
        Ok((0..x.rows())
            .map(|i| sigmoid(dot(x.row(i), &self.weights) + self.bias))
            .collect())
    }

    /// Tensors `logreg.w`, `logreg.b`, `logreg.l2`.
    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        let f = |v: T| v.as_f64();
        write_gprm(
            w,
            &[
                Tensor::new(
                    "logreg.w",
                    vec![self.weights.len()],
                    self.weights.iter().copied().map(f).collect(),
                ),
                Tensor::new("logreg.b", vec![1], vec![f(self.bias)]),
                Tensor::new("logreg.l2", vec![1], vec![f(self.l2)]),
            ],
        )
    }

    pub fn load<R: Read>(r: R) -> Result<Self> {
        let tensors = read_gprm(r)?;
        let get = |name: &str| {
            tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::Format(format!("missing tensor {name}")))
        };
        let scalar = |name: &str| -> Result<T> {
            let t = get(name)?;
            match t.data.as_slice() {
                [v] => Ok(T::of(*v)),
                _ => Err(Error::ShapeMismatch(format!("{name} must hold one value"))),
            }
        };
        Ok(Self {
            weights: get("logreg.w")?.data.iter().map(|&v| T::of(v)).collect(),
            bias: scalar("logreg.b")?,
            l2: scalar("logreg.l2")?,
            iterations: 0,
            grad_norm: T::zero(),
        })
    }
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Column standardization; constant columns get a zero scale.
struct Standardizer<T> {
    mean: Vec<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    fn fit(x: &Matrix<T>) -> Self {
        let n = T::of_usize(x.rows());
        let mean = x.column_means();
        let inv_std = (0..x.cols())
            .map(|j| {
                let var = (0..x.rows())
                    .map(|i| (x[(i, j)] - mean[j]).powi(2))
                    .sum::<T>()
                    / n;
                let sd = var.sqrt();
                if sd > T::of(1e-12) * mean[j].abs().max(T::one()) {
                    sd.recip()
                } else {
                    T::zero()
                }
            })
            .collect();
        Self { mean, inv_std }
    }

    fn apply(&self, x: &Matrix<T>) -> Matrix<T> {
        Matrix::from_fn(x.rows(), x.cols(), |i, j| {
            (x[(i, j)] - self.mean[j]) * self.inv_std[j]
        })
    }
}

/// Mean logistic loss plus `l2 / 2 * |w|^2` (bias unpenalized), and its
/// gradient with the bias derivative last.
pub fn loss_and_grad<T: Scalar>(x: &Matrix<T>, y: &[u8], w: &[T], b: T, l2: T) -> (T, Vec<T>) {
    let n = T::of_usize(x.rows());
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); w.len() + 1];
    for (i, &label) in y.iter().enumerate() {
        let row = x.row(i);
        let z = dot(row, w) + b;
        let t = if label == 1 { T::one() } else { T::zero() };
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, &xv) in grad.iter_mut().zip(row) {
            *g += r * xv;
        }
        grad[w.len()] += r;
    }
    loss /= n;
    for g in grad.iter_mut() {
        *g /= n;
    }
    loss += l2 * T::of(0.5) * dot(w, w);
    for (g, &wv) in grad.iter_mut().zip(w) {
        *g += l2 * wv;
    }
    (loss, grad)
}

/// Diagonally scaled gradient descent with Armijo backtracking on
/// standardized columns.
pub fn fit_logreg<T: Scalar>(
    x: &Matrix<T>,
    y: &[u8],
    cfg: &LogRegConfig,
) -> Result<LogRegModel<T>> {
    if y.len() != x.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} rows",
            y.len(),
            x.rows()
        )));
    }
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(Error::DegenerateLabels);
    }
    let std = Standardizer::fit(x);
    let xs = std.apply(x);
    let l2 = T::of(cfg.l2);
    let f = xs.cols();

    let mut w = vec![T::zero(); f];
    let mut b = T::zero();
    let (mut loss, mut grad) = loss_and_grad(&xs, y, &w, b, l2);
    // Per-coordinate curvature bounds; the standardized logistic Hessian is at
    // most 1/4 on the diagonal, plus the penalty on weights.
    let quarter = T::of(0.25);
    let precond: Vec<T> = (0..=f)
        .map(|k| {
            if k < f {
                (quarter + l2).recip()
            } else {
                quarter.recip()
            }
        })
        .collect();
    let mut step = T::one();
    let mut iterations = 0;
    let half = T::of(0.5);
    while iterations < cfg.max_iter {
        if dot(&grad, &grad).sqrt() < T::of(cfg.tol) {
            break;
        }
        iterations += 1;
        let dir: Vec<T> = grad.iter().zip(&precond).map(|(&g, &p)| g * p).collect();
        let decrease = dot(&grad, &dir);
        step = (step * T::of(2.0)).min(T::one());
        loop {
            let w_new: Vec<T> = w.iter().zip(&dir).map(|(&wv, &d)| wv - step * d).collect();
            let b_new = b - step * dir[f];
            let (l_new, g_new) = loss_and_grad(&xs, y, &w_new, b_new, l2);
            if l_new <= loss - half * step * decrease {
                w = w_new;
                b = b_new;
                loss = l_new;
                grad = g_new;
                break;
            }
            step *= half;
            if step < T::of(1e-20) {
                // No representable descent left.
                iterations = cfg.max_iter;
                break;
            }
        }
    }
    let grad_norm = dot(&grad, &grad).sqrt();

    // Fold the standardization back into the weights.
    let weights: Vec<T> = w.iter().zip(&std.inv_std).map(|(&wv, &s)| wv * s).collect();
    let bias = b - weights
        .iter()
        .zip(&std.mean)
        .map(|(&wv, &m)| wv * m)
        .sum::<T>();
    Ok(LogRegModel {
        weights,
        bias,
        l2,
        iterations,
        grad_norm,
    })
}
