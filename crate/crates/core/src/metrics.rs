//! Confusion matrices, the classification scores derived from them, and
//! fold-level aggregation.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<u64>,
    n_classes: usize,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        Self {
            counts: vec![0; n_classes * n_classes],
            n_classes,
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("confusion matrix must be square".into()));
        }
        Ok(Self {
            counts: rows.concat(),
            n_classes: n,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        (0..self.n_classes).map(|j| self.get(i, j)).sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..self.n_classes).map(|i| self.get(i, j)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.n_classes.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n_classes != self.n_classes {
            return Err(Error::Dimension("confusion matrices differ in size".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Row-normalised proportions; empty rows stay zero.
    pub fn row_proportions(&self) -> Vec<Vec<f64>> {
        (0..self.n_classes)
            .map(|i| {
                let s = self.row_sum(i);
                (0..self.n_classes)
                    .map(|j| if s == 0 { 0.0 } else { self.get(i, j) as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn to_csv(&self, labels: &[String]) -> String {
        grid_csv(labels, &self.rows(), |v| v.to_string())
    }
}

fn grid_csv<V>(labels: &[String], rows: &[Vec<V>], fmt: impl Fn(&V) -> String) -> String {
    let name = |i: usize| labels.get(i).cloned().unwrap_or_else(|| i.to_string());
    let mut out = String::from("true\\pred");
    for j in 0..rows.len() {
        out.push(',');
        out.push_str(&name(j));
    }
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        out.push_str(&name(i));
        for v in row {
            out.push(',');
            out.push_str(&fmt(v));
        }
        out.push('\n');
    }
    out
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::Parameter(format!("label pair ({t}, {p}) outside {n_classes} classes")));
        }
        cm.counts[t * n_classes + p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy plus macro-averaged precision, recall and F1 (0/0 taken as 0).
pub fn scores(cm: &ConfusionMatrix) -> Result<Scores> {
    let total = cm.total();
    if total == 0 || cm.n_classes == 0 {
        return Err(Error::Empty("confusion matrix has no samples".into()));
    }
    let k = cm.n_classes as f64;
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for i in 0..cm.n_classes {
        let p = ratio(cm.get(i, i), cm.col_sum(i));
        let r = ratio(cm.get(i, i), cm.row_sum(i));
        p_sum += p;
        r_sum += r;
        f_sum += if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    }
    Ok(Scores {
        accuracy: ratio(cm.trace(), total),
        precision: p_sum / k,
        recall: r_sum / k,
        f1: f_sum / k,
    })
}

/// Chance-corrected agreement; defined as 0 when expected agreement is 1.
pub fn cohen_kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix has no samples".into()));
    }
    let n = total as f64;
    let p_o = cm.trace() as f64 / n;
    let p_e = (0..cm.n_classes)
        .map(|i| cm.row_sum(i) as f64 * cm.col_sum(i) as f64)
        .sum::<f64>()
        / (n * n);
    if p_e >= 1.0 {
        return Ok(0.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Row-proportion difference `normalize(a) − normalize(b)`, conventionally
/// augmented minus baseline.
pub fn difference_matrix(a: &ConfusionMatrix, b: &ConfusionMatrix) -> Result<Vec<Vec<f64>>> {
    if a.n_classes != b.n_classes {
        return Err(Error::Dimension(format!(
            "confusion matrices have {} and {} classes",
            a.n_classes, b.n_classes
        )));
    }
    Ok(a
        .row_proportions()
        .into_iter()
        .zip(b.row_proportions())
        .map(|(ra, rb)| ra.into_iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect())
}

pub fn difference_csv(labels: &[String], d: &[Vec<f64>]) -> String {
    grid_csv(labels, d, |v| format!("{v:.6}"))
}

/// Plain-text heat table: one glyph per cell by magnitude, sign-coloured by character.
pub fn heat_table(labels: &[String], d: &[Vec<f64>]) -> String {
    const POS: [char; 5] = [' ', '.', '+', '*', '#'];
    const NEG: [char; 5] = [' ', ',', '-', '=', '@'];
    let mut out = String::new();
    for (i, row) in d.iter().enumerate() {
        let name = labels.get(i).cloned().unwrap_or_else(|| i.to_string());
        let _ = write!(out, "{name:>20} |");
        for &v in row {
            let level = ((v.abs() * 4.0).ceil() as usize).min(4);
            let glyph = if v >= 0.0 { POS[level] } else { NEG[level] };
            let _ = write!(out, " {glyph}{v:+.2}");
        }
        out.push('\n');
    }
    out
}

/// Every metric for one fold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub kappa: f64,
}

impl FoldMetrics {
    pub const NAMES: [&'static str; 5] = ["accuracy", "precision", "recall", "f1", "kappa"];

    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        let s = scores(cm)?;
        Ok(Self {
            accuracy: s.accuracy,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            kappa: cohen_kappa(cm)?,
        })
    }

    pub fn values(&self) -> [f64; 5] {
        [self.accuracy, self.precision, self.recall, self.f1, self.kappa]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation of each metric across folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub kappa: MeanStd,
}

impl Aggregate {
    pub fn values(&self) -> [MeanStd; 5] {
        [self.accuracy, self.precision, self.recall, self.f1, self.kappa]
    }
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    // summation order fixed so shuffled fold lists aggregate identically
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

pub fn aggregate_folds(folds: &[FoldMetrics]) -> Result<Aggregate> {
    if folds.is_empty() {
        return Err(Error::Empty("no folds to aggregate".into()));
    }
    let col = |f: fn(&FoldMetrics) -> f64| mean_std(&folds.iter().map(f).collect::<Vec<_>>());
    Ok(Aggregate {
        accuracy: col(|m| m.accuracy),
        precision: col(|m| m.precision),
        recall: col(|m| m.recall),
        f1: col(|m| m.f1),
        kappa: col(|m| m.kappa),
    })
}

/// Per-fold metrics as CSV.
pub fn fold_metrics_csv(folds: &[(usize, FoldMetrics)]) -> String {
    let mut out = format!("fold,{}\n", FoldMetrics::NAMES.join(","));
    for (fold, m) in folds {
        out.push_str(&fold.to_string());
        for v in m.values() {
            let _ = write!(out, ",{v:.6}");
        }
        out.push('\n');
    }
    out
}

pub const SUMMARY_HEADER: &str = "scheme,folds,accuracy_mean,accuracy_std,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,kappa_mean,kappa_std";

/// One summary row: scheme, fold count, then mean/std per metric.
pub fn summary_row(scheme: &str, n_folds: usize, agg: &Aggregate) -> String {
    let mut out = format!("{scheme},{n_folds}");
    for ms in agg.values() {
        let _ = write!(out, ",{:.6},{:.6}", ms.mean, ms.std);
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
