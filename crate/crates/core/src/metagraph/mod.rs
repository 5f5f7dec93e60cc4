//! Molecule-level meta-graph and the weighted GraphSAGE classifier on it.
//!
//! Every molecule is a node; every pair is joined by an edge weighted with a
//! Gaussian kernel over the cosine distance of their feature vectors.

mod sage;

use std::io::{BufRead, BufReader, Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{read_fmat, write_fmat};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub use sage::{
    sage_forward, sage_grad_check, sage_loss_grad, train_sage, SageConfig, SageInput, SageParams,
    SAGE_HIDDEN1, SAGE_HIDDEN2,
};

/// Lower bound on vector norms before dividing, so zero rows stay finite.
pub const NORM_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeMask {
    Train,
    Val,
    Test,
}

impl NodeMask {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeMask::Train => "train",
            NodeMask::Val => "val",
            NodeMask::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(NodeMask::Train),
            "val" => Some(NodeMask::Val),
            "test" => Some(NodeMask::Test),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaGraph<T> {
    /// One row per molecule.
    pub features: Matrix<T>,
    /// Symmetric kernel weights in `[0, 1]`. The diagonal is 1 and is never
    /// used for aggregation.
    pub weights: Matrix<T>,
    /// Kernel bandwidth: population standard deviation of the off-diagonal
    /// distances.
    pub sigma: T,
    pub labels: Vec<u8>,
    pub masks: Vec<NodeMask>,
}

/// Pairwise cosine distances `1 - (cos + 1) / 2`, computed once per pair.
pub fn cosine_distances<T: Scalar>(s: &Matrix<T>) -> Matrix<T> {
    let n = s.rows();
    let guard = T::of(NORM_GUARD);
    let norms: Vec<T> = (0..n)
        .map(|i| s.row(i).iter().map(|&x| x * x).sum::<T>().sqrt().max(guard))
        .collect();
    let half = T::of(0.5);
    let upper: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = s.row(i);
            (i + 1..n)
                .map(|j| {
                    let dot: T = a.iter().zip(s.row(j)).map(|(&x, &y)| x * y).sum();
                    let cos = (dot / (norms[i] * norms[j])).max(-T::one()).min(T::one());
                    T::one() - (cos + T::one()) * half
                })
                .collect()
        })
        .collect();
    let mut d = Matrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + 1 + k;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Kernel weights `exp(-d^2 / 2 sigma^2)`, divided by their largest
/// off-diagonal value, and the bandwidth `sigma`. The division is done in the
/// exponent, so a small `sigma` cannot underflow every weight to zero.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn kernel_weights<T: Scalar>(s: &Matrix<T>) -> Result<(Matrix<T>, T)> {
    let n = s.rows();
    if n < 2 {
        return Err(Error::ShapeMismatch(format!(
            "meta-graph needs at least 2 nodes, got {n}"
        )));
    }
    let d = cosine_distances(s);
    let pairs = T::of_usize(n * (n - 1) / 2);
    let off = || (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
    let mean = off().map(|(i, j)| d[(i, j)]).sum::<T>() / pairs;
    let var = off().map(|(i, j)| (d[(i, j)] - mean).powi(2)).sum::<T>() / pairs;
    let sigma = var.sqrt();
    if !(sigma > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    let denom = T::of(2.0) * sigma * sigma;
    let nearest = off()
        .map(|(i, j)| d[(i, j)] * d[(i, j)])
        .fold(T::infinity(), T::min);
    let w = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            T::one()
        } else {
            (-(d[(i, j)] * d[(i, j)] - nearest) / denom).exp()
        }
    });
    Ok((w, sigma))
}

impl<T: Scalar> MetaGraph<T> {
    /// Builds the kernel over `features`, one node per row.
    pub fn build(features: Matrix<T>, labels: Vec<u8>, masks: Vec<NodeMask>) -> Result<Self> {
        let (weights, sigma) = kernel_weights(&features)?;
        Self::from_parts(features, weights, sigma, labels, masks)
    }

    /// Assembles a meta-graph from precomputed weights after shape checks.
    pub fn from_parts(
        features: Matrix<T>,
        weights: Matrix<T>,
        sigma: T,
        labels: Vec<u8>,
        masks: Vec<NodeMask>,
    ) -> Result<Self> {
        let n = features.rows();
        if weights.shape() != (n, n) || labels.len() != n || masks.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{n} feature rows, {:?} weights, {} labels, {} masks",
                weights.shape(),
                labels.len(),
                masks.len()
            )));
        }
        Ok(Self {
            features,
            weights,
            sigma,
            labels,
            masks,
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    /// Node indices carrying `mask`, ascending.
    pub fn nodes(&self, mask: NodeMask) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.masks[i] == mask).collect()
    }

    /// Writes the node manifest (`node,mask,label`, preceded by a
    /// `# sigma=` line), the weight matrix and the features.
    pub fn save<N: Write, W: Write, F: Write>(
        &self,
        mut nodes: N,
        weights: W,
        features: F,
    ) -> Result<()> {
        writeln!(nodes, "# sigma={:e}", self.sigma.as_f64())?;
        let mut wtr = csv::Writer::from_writer(nodes);
        wtr.write_record(["node", "mask", "label"])?;
        for i in 0..self.n() {
            wtr.write_record([
                i.to_string().as_str(),
                self.masks[i].as_str(),
                &self.labels[i].to_string(),
            ])?;
        }
        wtr.flush()?;
        write_fmat(weights, &self.weights)?;
        write_fmat(features, &self.features)
    }

    pub fn load<N: Read, W: Read, F: Read>(nodes: N, weights: W, features: F) -> Result<Self> {
        let mut nodes = BufReader::new(nodes);
        let mut first = String::new();
        nodes.read_line(&mut first)?;
        let sigma: f64 = first
            .trim()
            .strip_prefix("# sigma=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| {
                Error::Format("node manifest must start with '# sigma=<value>'".into())
            })?;
        let mut rdr = csv::Reader::from_reader(nodes);
        if rdr.headers()?.iter().ne(["node", "mask", "label"]) {
            return Err(Error::Format(
                "node manifest header must be node,mask,label".into(),
            ));
        }
        let mut labels = Vec::new();
        let mut masks = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec[0].parse::<usize>().ok() != Some(i) {
                return Err(Error::Format(format!(
                    "node ids must be 0..n in order, got {:?}",
                    &rec[0]
                )));
            }
            masks.push(
                NodeMask::parse(&rec[1])
                    .ok_or_else(|| Error::Format(format!("bad mask {:?}", &rec[1])))?,
            );
            labels.push(match &rec[2] {
                "0" => 0,
                "1" => 1,
                other => return Err(Error::Format(format!("bad label {other:?}"))),
            });
        }
        Self::from_parts(
            read_fmat(features)?,
            read_fmat(weights)?,
            T::of(sigma),
            labels,
            masks,
        )
    }
}
