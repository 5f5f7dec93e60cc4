use std::fmt::Write as _;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::logreg::{fit_logreg, LogRegConfig};
use super::metrics::{metrics, MetricsReport, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Stratified fold id per sample.
///
/// Each class is shuffled with the seed, then the classes are laid end to end
/// and dealt round-robin, so fold sizes and per-fold class counts differ by at
/// most one. Requires `2 <= k <= n` and at least `k` samples of each class,
/// except for leave-one-out (`k == n`), which needs two of each.
pub fn stratified_folds(y: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = y.len();
    if k < 2 || k > n {
        return Err(Error::DegenerateSplit(format!("{k} folds for {n} samples")));
    }
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &label) in y.iter().enumerate() {
        classes[usize::from(label == 1)].push(i);
    }
    let need = if k == n { 2 } else { k };
    if classes.iter().any(|c| c.len() < need) {
        return Err(Error::DegenerateSplit(format!(
            "class counts {}/{} too small for {k} folds",
            classes[0].len(),
            classes[1].len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; n];
    let mut slot = 0;
    for class in classes.iter_mut() {
        class.shuffle(&mut rng);
        for &i in class.iter() {
            fold[i] = slot % k;
            slot += 1;
        }
    }
    Ok(fold)
}

/// Mean and spread of each metric across folds.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSummary {
    pub acc: f64,
    pub se: f64,
    pub sp: f64,
    pub f1: f64,
    pub mcc: f64,
    pub auc: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CvReport {
    pub folds: Vec<MetricsReport>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    /// Metrics over all out-of-fold predictions at once.
    pub pooled: MetricsReport,
    pub oof_scores: Vec<f64>,
}

pub fn kfold_cv<T: Scalar>(
    x: &Matrix<T>,
    y: &[u8],
    k: usize,
    seed: u64,
    head: &LogRegConfig,
) -> Result<CvReport> {
    if y.len() != x.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} rows",
            y.len(),
            x.rows()
        )));
    }
    let fold = stratified_folds(y, k, seed)?;
    let per_fold = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train, test): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| fold[i] != f);
            let ytr: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let yte: Vec<u8> = test.iter().map(|&i| y[i]).collect();
            let model = fit_logreg(&x.select_rows(&train), &ytr, head)?;
            let p = model.predict_proba(&x.select_rows(&test))?;
            let report = metrics(&yte, &p, DEFAULT_THRESHOLD)?;
            Ok((test, p, report))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut oof = vec![0.0; y.len()];
    let mut folds = Vec::with_capacity(k);
    for (test, p, report) in per_fold {
        for (i, pi) in test.into_iter().zip(p) {
            oof[i] = pi.as_f64();
        }
        folds.push(report);
    }
    let pooled = metrics(y, &oof, DEFAULT_THRESHOLD)?;
    let (mean, std) = summarize(&folds);
    Ok(CvReport {
        folds,
        mean,
        std,
        pooled,
        oof_scores: oof,
    })
}

/// Mean and sample standard deviation; AUC over folds where it is defined.
pub fn summarize(folds: &[MetricsReport]) -> (MetricSummary, MetricSummary) {
    let stat = |v: Vec<f64>| -> Option<(f64, f64)> {
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some((mean, var.sqrt()))
    };
    let pick =
        |f: fn(&MetricsReport) -> f64| stat(folds.iter().map(f).collect()).unwrap_or_default();
    let acc = pick(|r| r.acc);
    let se = pick(|r| r.se);
    let sp = pick(|r| r.sp);
    let f1 = pick(|r| r.f1);
    let mcc = pick(|r| r.mcc);
    let auc = stat(folds.iter().filter_map(|r| r.auc).collect());
    (
        MetricSummary {
            acc: acc.0,
            se: se.0,
            sp: sp.0,
            f1: f1.0,
            mcc: mcc.0,
            auc: auc.map(|a| a.0),
        },
        MetricSummary {
            acc: acc.1,
            se: se.1,
            sp: sp.1,
            f1: f1.1,
            mcc: mcc.1,
            auc: auc.map(|a| a.1),
        },
    )
}

const HEADER: [&str; 12] = [
    "fold", "tp", "tn", "fp", "fn", "acc", "se", "sp", "f1", "mcc", "auc", "flags",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

fn report_row(name: &str, r: &MetricsReport) -> Vec<String> {
    vec![
        name.to_string(),
        r.tp.to_string(),
        r.tn.to_string(),
        r.fp.to_string(),
        r.fn_.to_string(),
        format!("{:.6}", r.acc),
        format!("{:.6}", r.se),
        format!("{:.6}", r.sp),
        format!("{:.6}", r.f1),
        format!("{:.6}", r.mcc),
        fmt_opt(r.auc),
        r.flags.to_string(),
    ]
}

fn summary_row(name: &str, s: &MetricSummary) -> Vec<String> {
    let mut row = vec![name.to_string()];
    row.extend(std::iter::repeat_n(String::new(), 4));
    row.extend(
        [s.acc, s.se, s.sp, s.f1, s.mcc]
            .iter()
            .map(|v| format!("{v:.6}")),
    );
    row.push(fmt_opt(s.auc));
    row.push(String::new());
    row
}

impl CvReport {
    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = self
            .folds
            .iter()
            .enumerate()
            .map(|(i, r)| report_row(&i.to_string(), r))
            .collect();
        rows.push(summary_row("mean", &self.mean));
        rows.push(summary_row("std", &self.std));
        rows.push(report_row("pooled", &self.pooled));
        rows
    }

    /// One row per fold, then `mean`, `std` and `pooled` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(HEADER)?;
        for row in self.rows() {
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn table(&self) -> String {
        let rows = self.rows();
        let widths: Vec<usize> = (0..HEADER.len())
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].len())
                    .chain([HEADER[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let mut line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&HEADER.map(String::from));
        for r in &rows {
            line(r);
        }
        out
    }
}
