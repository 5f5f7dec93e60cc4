use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Which rates hit a zero denominator and were reported as 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DegenerateFlags {
    pub se: bool,
    pub sp: bool,
    pub f1: bool,
    pub mcc: bool,
    /// Only one class present, so AUC is undefined.
    pub auc: bool,
}

impl DegenerateFlags {
    pub fn any(&self) -> bool {
        self.se || self.sp || self.f1 || self.mcc || self.auc
    }
}

impl fmt::Display for DegenerateFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.se, "se"),
            (self.sp, "sp"),
            (self.f1, "f1"),
            (self.mcc, "mcc"),
            (self.auc, "auc"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        f.write_str(&names.join("|"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub acc: f64,
    pub se: f64,
    pub sp: f64,
    pub f1: f64,
    pub mcc: f64,
    pub auc: Option<f64>,
    pub threshold: f64,
    pub flags: DegenerateFlags,
}

impl MetricsReport {
    pub fn n(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Confusion-based rates at `threshold` (score >= threshold is positive) plus
/// rank AUC.
pub fn metrics<T: Scalar>(y_true: &[u8], scores: &[T], threshold: f64) -> Result<MetricsReport> {
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    if y_true.len() != scores.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} scores",
            y_true.len(),
            scores.len()
        )));
    }
    let scores: Vec<f64> = scores.iter().map(|s| s.as_f64()).collect();
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&y, &s) in y_true.iter().zip(&scores) {
        match (y == 1, s >= threshold) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
        }
    }
    Ok(from_counts(
        tp,
        tn,
        fp,
        fn_,
        rank_auc(y_true, &scores),
        threshold,
    ))
}

/// Builds a report from confusion counts and an optional AUC.
pub fn from_counts(
    tp: usize,
    tn: usize,
    fp: usize,
    fn_: usize,
    auc: Option<f64>,
    threshold: f64,
) -> MetricsReport {
    let mut flags = DegenerateFlags::default();
    let ratio = |num: usize, den: usize, flag: &mut bool| {
        if den == 0 {
            *flag = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let n = tp + tn + fp + fn_;
    let acc = if n == 0 {
        0.0
    } else {
        (tp + tn) as f64 / n as f64
    };
    let se = ratio(tp, tp + fn_, &mut flags.se);
    let sp = ratio(tn, tn + fp, &mut flags.sp);
    let f1 = ratio(2 * tp, 2 * tp + fp + fn_, &mut flags.f1);
    let marg = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    let mcc = if marg.contains(&0) {
        flags.mcc = true;
        0.0
    } else {
        let num = tp as f64 * tn as f64 - fp as f64 * fn_ as f64;
        num / marg.iter().map(|&m| m as f64).product::<f64>().sqrt()
    };
    flags.auc = auc.is_none();
    MetricsReport {
        tp,
        tn,
        fp,
        fn_,
        acc,
        se,
        sp,
        f1,
        mcc,
        auc,
        threshold,
        flags,
    }
}

/// Mann-Whitney AUC from midranks; `None` unless both classes are present.
pub fn rank_auc(y_true: &[u8], scores: &[f64]) -> Option<f64> {
    let n_pos = y_true.iter().filter(|&&y| y == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; the tie block i..=j shares the mean rank.
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if y_true[k] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}
