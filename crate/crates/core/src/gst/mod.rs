//! Geometric graph scattering: diffusion and tight Hann wavelet cascades.
//!
//! The molecule descriptor ("GGS vector") is the concatenation of a Hann block
//! and a diffusion block. With the default configuration the Hann block holds
//! the order-0 coefficients (one per node feature, 7 values) and the diffusion
//! block holds orders 1 to 3 over 4 wavelets, `7 * (4 + 16 + 64) = 588`
//! values, for 595 in total.

use std::fmt;

use crate::error::{Error, Result};
use crate::graphcore::{build_matrices, GraphMatrices};
use crate::ingest::{MolecularGraph, NODE_FEATURES, NODE_FEATURE_NAMES};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterKind {
    Diffusion,
    Hann,
}

/// Hann kernel flavor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HannVariant {
    /// `0.5 + 0.5 cos(2 pi a x + 0.5)` evaluated for every `x`, with
    /// `a = (J + 1 - R) / (R e_max)`; the 0.5 phase is kept as printed.
    PaperExact,
    /// `0.5 + 0.5 cos(2 pi a x)` on `|a x| <= 1/2`, zero elsewhere.
    StandardHann,
}

impl HannVariant {
    pub fn name(self) -> &'static str {
        match self {
            HannVariant::PaperExact => "paper-exact",
            HannVariant::StandardHann => "standard-hann",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "paper-exact" => Ok(HannVariant::PaperExact),
            "standard-hann" => Ok(HannVariant::StandardHann),
            other => Err(Error::Config(format!("unknown Hann variant '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HannParams {
    pub overlap: f64,
    pub e_max: f64,
    pub variant: HannVariant,
}

#[derive(Clone, Debug)]
pub struct FilterBank<T> {
    pub kind: FilterKind,
    pub filters: Vec<Matrix<T>>,
    pub hann: Option<HannParams>,
}

impl<T: Scalar> FilterBank<T> {
    pub fn scales(&self) -> usize {
        self.filters.len()
    }

    pub fn dim(&self) -> usize {
        self.filters.first().map_or(0, Matrix::rows)
    }

    /// `sum_j H_j^T H_j`.
    pub fn frame_operator(&self) -> Matrix<T> {
        let n = self.dim();
        self.filters.iter().fold(Matrix::zeros(n, n), |acc, h| {
            acc.add(&h.transpose().matmul(h))
        })
    }
}

/// Diffusion wavelets `H_0 = I + T`, `H_j = T^(2^(j-1)) (I - T^(2^(j-1)))`
/// for `j = 1..J-1`; dyadic powers by repeated squaring.
pub fn diffusion_filters<T: Scalar>(walk: &Matrix<T>, scales: usize) -> Result<FilterBank<T>> {
    if !walk.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "walk operator must be square, got {:?}",
            walk.shape()
        )));
    }
    if scales == 0 {
        return Err(Error::Config("diffusion scales must be at least 1".into()));
    }
    let n = walk.rows();
    let eye = Matrix::identity(n);
    let mut filters = Vec::with_capacity(scales);
    filters.push(eye.add(walk));
    let mut power = walk.clone();
    for _ in 1..scales {
        filters.push(power.matmul(&eye.sub(&power)));
        power = power.matmul(&power);
    }
    Ok(FilterBank {
        kind: FilterKind::Diffusion,
        filters,
        hann: None,
    })
}

/// Hann window value at `x` for `J` scales, overlap `R` and spectrum bound `e_max`.
pub fn hann_kernel<T: Scalar>(
    x: T,
    scales: usize,
    overlap: T,
    e_max: T,
    variant: HannVariant,
) -> T {
    let a = (T::of_usize(scales) + T::one() - overlap) / (overlap * e_max);
    let half = T::of(0.5);
    let arg = T::of(2.0) * T::PI() * a * x;
    match variant {
        HannVariant::PaperExact => half + half * (arg + half).cos(),
        HannVariant::StandardHann => {
            if (a * x).abs() <= half {
                half + half * arg.cos()
            } else {
                T::zero()
            }
        }
    }
}

/// Center `t_j = (j + 1) e_max / (J + 1 - R)` of wavelet `j`.
pub fn hann_center<T: Scalar>(j: usize, scales: usize, overlap: T, e_max: T) -> T {
    T::of_usize(j + 1) * e_max / (T::of_usize(scales) + T::one() - overlap)
}

/// Spectral Hann wavelets `H_j = V diag(h(lambda - t_j)) V^T`, `j = 0..J-1`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn hann_filters<T: Scalar>(
    eigvecs: &Matrix<T>,
    eigvals: &[T],
    scales: usize,
    overlap: T,
    variant: HannVariant,
) -> Result<FilterBank<T>> {
    if scales == 0
        || !(overlap > T::zero())
        || T::of_usize(scales) + T::one() - overlap <= T::zero()
    {
        return Err(Error::InvalidScaleParams {
            scales,
            overlap: overlap.as_f64(),
        });
    }
    if eigvecs.rows() != eigvals.len() || eigvecs.cols() != eigvals.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} eigenvalues for eigenvector matrix {:?}",
            eigvals.len(),
            eigvecs.shape()
        )));
    }
    let e_max = eigvals.iter().fold(T::of(1e-6), |m, &l| m.max(l));
    let filters = (0..scales)
        .map(|j| {
            let t = hann_center(j, scales, overlap, e_max);
            let psi: Vec<T> = eigvals
                .iter()
                .map(|&l| hann_kernel(l - t, scales, overlap, e_max, variant))
                .collect();
            spectral_filter(eigvecs, &psi)
        })
        .collect();
    Ok(FilterBank {
        kind: FilterKind::Hann,
        filters,
        hann: Some(HannParams {
            overlap: overlap.as_f64(),
            e_max: e_max.as_f64(),
            variant,
        }),
    })
}

/// `V diag(response) V^T`.
pub fn spectral_filter<T: Scalar>(eigvecs: &Matrix<T>, response: &[T]) -> Matrix<T> {
    let n = eigvecs.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = T::zero();
            for (k, &r) in response.iter().enumerate() {
                s += eigvecs[(i, k)] * r * eigvecs[(j, k)];
            }
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

/// Position of one scattering coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefficientLabel {
    pub block: FilterKind,
    /// Wavelet indices `(j_1, ..., j_m)`; empty for order 0.
    pub path: Vec<u8>,
    pub feature: usize,
}

impl CoefficientLabel {
    pub fn order(&self) -> usize {
        self.path.len()
    }
}

impl fmt::Display for CoefficientLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let block = match self.block {
            FilterKind::Diffusion => "diffusion",
            FilterKind::Hann => "hann",
        };
        let path: Vec<String> = self.path.iter().map(u8::to_string).collect();
        let feature = NODE_FEATURE_NAMES
            .get(self.feature)
            .map_or_else(|| format!("f{}", self.feature), |s| (*s).to_string());
        write!(f, "{block}[{}]:{feature}", path.join("."))
    }
}

#[derive(Clone, Debug)]
pub struct ScatterCoefficients<T> {
    pub values: Vec<T>,
    pub labels: Vec<CoefficientLabel>,
}

impl<T: Scalar> ScatterCoefficients<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keeps only coefficients whose order lies in `orders`.
    pub fn filter_orders(self, orders: std::ops::RangeInclusive<usize>) -> Self {
        let (values, labels) = self
            .values
            .into_iter()
            .zip(self.labels)
            .filter(|(_, l)| orders.contains(&l.order()))
            .unzip();
        Self { values, labels }
    }
}

/// Number of coefficients of [`scatter_graph`] for `F` features, `J` wavelets
/// and the given depth: `F (1 + J + ... + J^depth)`.
pub fn coefficient_count(features: usize, scales: usize, depth: usize) -> usize {
    (0..=depth).map(|m| features * scales.pow(m as u32)).sum()
}

/// Scattering cascade of an `N x F` signal.
///
/// Order 0 is the column mean of `X`; order `m` is the column mean of
/// `|H_jm |... |H_j1 X|...||` for every path over the bank (scales may repeat).
/// Paths are enumerated in lexicographic order, features innermost.
pub fn scatter_graph<T: Scalar>(
    signal: &Matrix<T>,
    bank: &FilterBank<T>,
    depth: usize,
) -> Result<ScatterCoefficients<T>> {
    if depth > 0 && signal.rows() != bank.dim() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} rows, filters are {}x{}",
            signal.rows(),
            bank.dim(),
            bank.dim()
        )));
    }
    let f = signal.cols();
    let mut out = ScatterCoefficients {
        values: Vec::with_capacity(coefficient_count(f, bank.scales(), depth)),
        labels: Vec::new(),
    };
    push_block(&mut out, signal, bank.kind, &[]);

    // Breadth-first over orders so the output is grouped by order.
    let mut frontier: Vec<(Vec<u8>, Matrix<T>)> = vec![(Vec::new(), signal.clone())];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(frontier.len() * bank.scales());
        for (path, u) in &frontier {
            for (j, h) in bank.filters.iter().enumerate() {
                let propagated = h.matmul(u).abs();
                let mut p = path.clone();
                p.push(j as u8);
                push_block(&mut out, &propagated, bank.kind, &p);
                next.push((p, propagated));
            }
        }
        frontier = next;
    }
    Ok(out)
}

fn push_block<T: Scalar>(
    out: &mut ScatterCoefficients<T>,
    u: &Matrix<T>,
    block: FilterKind,
    path: &[u8],
) {
    for (feature, m) in u.column_means().into_iter().enumerate() {
        out.values.push(m);
        out.labels.push(CoefficientLabel {
            block,
            path: path.to_vec(),
            feature,
        });
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GgsConfig {
    pub diffusion_scales: usize,
    pub diffusion_depth: usize,
    pub hann_scales: usize,
    pub hann_overlap: f64,
    pub hann_variant: HannVariant,
    pub hann_depth: usize,
    /// Highest Hann order written to the descriptor.
    pub hann_emit_max_order: usize,
}

impl Default for GgsConfig {
    fn default() -> Self {
        Self {
            diffusion_scales: 4,
            diffusion_depth: 3,
            hann_scales: 4,
            hann_overlap: 3.0,
            hann_variant: HannVariant::PaperExact,
            hann_depth: 1,
            hann_emit_max_order: 0,
        }
    }
}

impl GgsConfig {
    /// Length of the descriptor for molecules with `F` node features.
    pub fn dim(&self, features: usize) -> usize {
        let emit = self.hann_emit_max_order.min(self.hann_depth);
        coefficient_count(features, self.hann_scales, emit)
            + coefficient_count(features, self.diffusion_scales, self.diffusion_depth)
            - features
    }
}

/// The GGS descriptor of one molecule.
#[derive(Clone, Debug)]
pub struct GgsVector<T> {
    pub values: Vec<T>,
    pub labels: Vec<CoefficientLabel>,
    /// Number of leading entries that belong to the Hann block.
    pub hann_len: usize,
}

impl<T: Scalar> GgsVector<T> {
    pub fn hann_block(&self) -> &[T] {
        &self.values[..self.hann_len]
    }

    pub fn diffusion_block(&self) -> &[T] {
        &self.values[self.hann_len..]
    }
}

pub fn ggs_features<T: Scalar>(g: &MolecularGraph, cfg: &GgsConfig) -> Result<GgsVector<T>> {
    let gm: GraphMatrices<T> = build_matrices(g)?;
    ggs_from_matrices(&g.feature_matrix(), &gm, cfg)
}

pub fn ggs_from_matrices<T: Scalar>(
    signal: &Matrix<T>,
    gm: &GraphMatrices<T>,
    cfg: &GgsConfig,
) -> Result<GgsVector<T>> {
    let hann = hann_filters(
        &gm.eigvecs,
        &gm.eigvals,
        cfg.hann_scales,
        T::of(cfg.hann_overlap),
        cfg.hann_variant,
    )?;
    let emit = cfg.hann_emit_max_order.min(cfg.hann_depth);
    let hann_coeffs = scatter_graph(signal, &hann, emit)?;

    let diffusion = diffusion_filters(&gm.lazy_walk, cfg.diffusion_scales)?;
    let diff_coeffs = scatter_graph(signal, &diffusion, cfg.diffusion_depth)?
        .filter_orders(1..=cfg.diffusion_depth);

    let hann_len = hann_coeffs.len();
    let mut values = hann_coeffs.values;
    values.extend(diff_coeffs.values);
    let mut labels = hann_coeffs.labels;
    labels.extend(diff_coeffs.labels);
    debug_assert_eq!(values.len(), cfg.dim(signal.cols()));
    Ok(GgsVector {
        values,
        labels,
        hann_len,
    })
}

/// Descriptor length for the standard 7 node features.
pub fn ggs_dim(cfg: &GgsConfig) -> usize {
    cfg.dim(NODE_FEATURES)
}
