//! Chi-squared feature ranking for binary labels.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Per-column chi-squared statistic after min-max scaling to `[0, 1]`.
///
/// Each column's scaled mass is split between the two classes; the observed
/// per-class mass is compared with the mass expected from the class
/// frequencies. Constant columns score 0.
pub fn chi2_scores<T: Scalar>(x: &Matrix<T>, y: &[u8]) -> Result<Vec<T>> {
    if y.len() != x.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} rows",
            y.len(),
            x.rows()
        )));
    }
    let n_pos = y.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(Error::DegenerateLabels);
    }
    let n = T::of_usize(y.len());
    let freq = [T::of_usize(y.len() - n_pos) / n, T::of_usize(n_pos) / n];
    let mut scores = Vec::with_capacity(x.cols());
    for c in 0..x.cols() {
        let col = x.col(c);
        let lo = col.iter().copied().fold(T::infinity(), T::min);
        let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
        let range = hi - lo;
        if range <= T::zero() {
            scores.push(T::zero());
            continue;
        }
        let mut observed = [T::zero(); 2];
        for (v, &label) in col.iter().zip(y) {
            observed[usize::from(label == 1)] += (*v - lo) / range;
        }
        let total = observed[0] + observed[1];
        let mut stat = T::zero();
        for k in 0..2 {
            let expected = freq[k] * total;
            if expected > T::zero() {
                stat += (observed[k] - expected).powi(2) / expected;
            }
        }
        scores.push(stat);
    }
    Ok(scores)
}

/// Indices of the `k` highest-scoring columns, best first; ties go to the
/// lower index.
pub fn chi2_select<T: Scalar>(x: &Matrix<T>, y: &[u8], k: usize) -> Result<Vec<usize>> {
    if k > x.cols() {
        return Err(Error::ShapeMismatch(format!(
            "cannot select {k} of {} columns",
            x.cols()
        )));
    }
    let scores = chi2_scores(x, y)?;
    let mut idx: Vec<usize> = (0..x.cols()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    Ok(idx)
}
