//! Synthetic corpora for smoke tests, examples and benchmarks.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr_free::exp1;

use crate::audio::{write_wav, Waveform};
use crate::error::Result;
use crate::features::LogMelPatch;

mod rand_distr_free {
    use rand::Rng;

    /// Unit-mean exponential variate.
    pub fn exp1(rng: &mut impl Rng) -> f64 {
        -(1.0 - rng.gen::<f64>()).ln()
    }
}

/// A sinusoid burst: Hann-enveloped tone of random phase, onset and
/// duration inside a `len`-sample clip.
pub fn sine_burst(freq_hz: f64, len: usize, sample_rate_hz: u32, rng: &mut impl Rng) -> Result<Waveform> {
    let burst = rng.gen_range(len / 2..=len);
    let onset = rng.gen_range(0..=len - burst);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let amp = rng.gen_range(0.5..0.9);
    let samples = (0..len)
        .map(|n| {
            if n < onset || n >= onset + burst {
                return 0.0;
            }
            let t = (n - onset) as f64;
            let env = 0.5 - 0.5 * (2.0 * PI * t / burst as f64).cos();
            (amp * env * (2.0 * PI * freq_hz * n as f64 / sample_rate_hz as f64 + phase).sin()) as f32
        })
        .collect();
    Waveform::new(samples, sample_rate_hz)
}

/// Log-mel patch of noise confined to mel bands `[lo, hi)`: band bins carry
/// unit-mean exponential energy, the rest sit near the floor.
pub fn band_noise_patch(frames: usize, mels: usize, lo: usize, hi: usize, rng: &mut impl Rng) -> LogMelPatch {
    let values = (0..frames * mels)
        .map(|i| {
            let m = i % mels;
            let scale = if (lo..hi).contains(&m) { 1.0 } else { 1e-4 };
            (scale * exp1(rng)).max(1e-6).ln() as f32
        })
        .collect();
    LogMelPatch { values, frames, mels }
}

/// `n_per_class` patches for each of `n_classes` disjoint mel regions.
/// Returns patches and labels interleaved by class.
pub fn mel_band_task(
    n_classes: usize,
    n_per_class: usize,
    frames: usize,
    mels: usize,
    rng: &mut impl Rng,
) -> (Vec<LogMelPatch>, Vec<usize>) {
    let width = mels / n_classes;
    let mut patches = Vec::with_capacity(n_classes * n_per_class);
    let mut labels = Vec::with_capacity(n_classes * n_per_class);
    for _ in 0..n_per_class {
        for c in 0..n_classes {
            patches.push(band_noise_patch(frames, mels, c * width, (c + 1) * width, rng));
            labels.push(c);
        }
    }
    (patches, labels)
}

/// Write a miniature dataset of tone clips: `clips_per_class` WAV files per
/// class in `dir` plus a `slice_file_name,fold,classID,class` metadata CSV.
/// Folds cycle through 1..=10. Returns the CSV path.
pub fn write_tone_dataset(
    dir: impl AsRef<Path>,
    classes: &[(&str, f64)],
    clips_per_class: usize,
    len: usize,
    sample_rate_hz: u32,
    rng: &mut impl Rng,
) -> Result<std::path::PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let mut csv = String::from("slice_file_name,fold,classID,class\n");
    for (c, (name, freq)) in classes.iter().enumerate() {
        for i in 0..clips_per_class {
            let file = format!("{name}_{i:03}.wav");
            let w = sine_burst(*freq, len, sample_rate_hz, rng)?;
            write_wav(&w, dir.join(&file))?;
            csv.push_str(&format!("{file},{},{c},{name}\n", 1 + i % 10));
        }
    }
    let path = dir.join("metadata.csv");
    std::fs::write(&path, csv).map_err(|e| crate::Error::io(&path, e))?;
    Ok(path)
}
