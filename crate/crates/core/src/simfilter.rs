//! Similarity scoring of generated clips against the training clips of
//! their class, and threshold filtering.

use std::path::Path;

use crate::audio::Waveform;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.1;
pub const DEFAULT_GUARD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityScore {
    pub value: f64,
    /// Number of compared samples.
    pub n: usize,
}

/// `S = Σ (a[n] − b[n])² / max(|a[n]·b[n]|, guard)`; the shorter clip is
/// zero-padded to the longer.
pub fn similarity(a: &Waveform, b: &Waveform, guard: f64) -> Result<SimilarityScore> {
    if a.sample_rate_hz() != b.sample_rate_hz() {
        return Err(Error::Parameter(format!(
            "sample rates differ: {} vs {}",
            a.sample_rate_hz(),
            b.sample_rate_hz()
        )));
    }
    similarity_samples(a.samples(), b.samples(), guard)
}

pub fn similarity_samples(a: &[f32], b: &[f32], guard: f64) -> Result<SimilarityScore> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("similarity of an empty clip".into()));
    }
    if !(guard > 0.0) {
        return Err(Error::Parameter(format!("guard must be positive, got {guard}")));
    }
    let n = a.len().max(b.len());
    let at = |s: &[f32], i: usize| s.get(i).copied().unwrap_or(0.0) as f64;
    let value = (0..n)
        .map(|i| {
            let (x, y) = (at(a, i), at(b, i));
            (x - y).powi(2) / (x * y).abs().max(guard)
        })
        .sum();
    Ok(SimilarityScore { value, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accepted,
    Rejected,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Accepted => "accepted",
            Decision::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRecord {
    /// Index into the generated set.
    pub generated: usize,
    /// Index of the closest reference.
    pub best_reference: usize,
    pub score: f64,
    pub decision: Decision,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub threshold: f64,
    pub guard: f64,
    /// Reject scores above the threshold instead of below it.
    pub reject_above: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            guard: DEFAULT_GUARD,
            reject_above: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub accepted: Vec<usize>,
    pub rejected: Vec<usize>,
    pub records: Vec<FilterRecord>,
}

/// Score each generated clip by its minimum similarity over the references
/// and reject it when the score is below the threshold (or above it, with
/// `reject_above`).
pub fn filter_generated(generated: &[Waveform], references: &[Waveform], cfg: &FilterConfig) -> Result<FilterOutcome> {
    if references.is_empty() {
        return Err(Error::Empty("no reference clips to compare against".into()));
    }
    let mut out = FilterOutcome {
        accepted: Vec::new(),
        rejected: Vec::new(),
        records: Vec::with_capacity(generated.len()),
    };
    for (gi, gen) in generated.iter().enumerate() {
        let mut best = (0usize, f64::INFINITY);
        for (ri, r) in references.iter().enumerate() {
            let s = similarity(gen, r, cfg.guard)?.value;
            if s < best.1 {
                best = (ri, s);
            }
        }
        let reject = if cfg.reject_above { best.1 > cfg.threshold } else { best.1 < cfg.threshold };
        let decision = if reject { Decision::Rejected } else { Decision::Accepted };
        match decision {
            Decision::Accepted => out.accepted.push(gi),
            Decision::Rejected => out.rejected.push(gi),
        }
        out.records.push(FilterRecord {
            generated: gi,
            best_reference: best.0,
            score: best.1,
            decision,
        });
    }
    Ok(out)
}

/// Manifest CSV: `generated_file,best_reference,score,decision`.
pub fn write_filter_manifest(
    path: impl AsRef<Path>,
    records: &[FilterRecord],
    generated_names: &[String],
    reference_names: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["generated_file", "best_reference", "score", "decision"])?;
    for r in records {
        w.write_record([
            generated_names[r.generated].as_str(),
            reference_names[r.best_reference].as_str(),
            &format!("{:.6e}", r.score),
            r.decision.as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}
