//! Log-mel feature extraction: Hann-windowed power STFT, triangular mel
//! filterbank, natural-log compression and fixed-size patch selection.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::Waveform;
use crate::error::{Error, Result};

pub const DEFAULT_FRAME_LEN: usize = 1024;
pub const DEFAULT_N_MELS: usize = 128;
pub const DEFAULT_PATCH_FRAMES: usize = 128;
pub const DEFAULT_EPS_FLOOR: f64 = 1e-6;

/// Row-major `[n_frames × n_bins]` power spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    pub values: Vec<f64>,
    pub n_frames: usize,
    pub n_bins: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate_hz: u32,
}

impl PowerSpectrogram {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_bins..(t + 1) * self.n_bins]
    }
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

pub(crate) struct RealFft {
    fft: Arc<dyn Fft<f64>>,
    len: usize,
}

impl RealFft {
    pub(crate) fn new(len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        Self { fft, len }
    }

    /// Complex spectrum of a real frame (full length).
    pub(crate) fn spectrum(&self, frame: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(self.len, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);
        buf
    }
}

pub fn stft_power(w: &Waveform, frame_len: usize, hop: usize) -> Result<PowerSpectrogram> {
    if frame_len == 0 || hop == 0 {
        return Err(Error::Parameter("frame length and hop must be positive".into()));
    }
    let x = w.samples();
    if x.len() < frame_len {
        return Err(Error::InputTooShort {
            needed: frame_len,
            got: x.len(),
        });
    }
    let n_frames = (x.len() - frame_len) / hop + 1;
    let n_bins = frame_len / 2 + 1;
    let window = hann(frame_len);
    let fft = RealFft::new(frame_len);
    let mut values = Vec::with_capacity(n_frames * n_bins);
    let mut frame = vec![0.0; frame_len];
    for t in 0..n_frames {
        let seg = &x[t * hop..t * hop + frame_len];
        for ((f, &s), &win) in frame.iter_mut().zip(seg).zip(&window) {
            *f = s as f64 * win;
        }
        let spec = fft.spectrum(&frame);
        values.extend(spec[..n_bins].iter().map(|c| c.norm_sqr()));
    }
    Ok(PowerSpectrogram {
        values,
        n_frames,
        n_bins,
        frame_len,
        hop,
        sample_rate_hz: w.sample_rate_hz(),
    })
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Row-major `[n_mels × n_bins]` triangular filterbank.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Vec<f64>,
    pub n_mels: usize,
    pub n_bins: usize,
    pub frame_len: usize,
    pub sample_rate_hz: u32,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl MelFilterbank {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Largest total weight any single FFT bin receives.
    pub fn max_column_sum(&self) -> f64 {
        (0..self.n_bins)
            .map(|b| (0..self.n_mels).map(|m| self.weights[m * self.n_bins + b]).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Antiderivative of a unit-height triangle on `[lo, hi]` peaking at `center`.
fn triangle_integral(x: f64, lo: f64, center: f64, hi: f64) -> f64 {
    if x <= lo {
        0.0
    } else if x <= center {
        (x - lo).powi(2) / (2.0 * (center - lo))
    } else if x <= hi {
        (hi - lo) / 2.0 - (hi - x).powi(2) / (2.0 * (hi - center))
    } else {
        (hi - lo) / 2.0
    }
}

/// Area-normalised triangular filters with centres equally spaced in mel.
///
/// Each weight is the triangle's mean over the frequency interval its FFT
/// bin covers, so narrow low-frequency bands still land on a bin.
pub fn mel_filterbank(
    n_mels: usize,
    frame_len: usize,
    sample_rate_hz: u32,
    fmin_hz: f64,
    fmax_hz: f64,
) -> Result<MelFilterbank> {
    let nyquist = sample_rate_hz as f64 / 2.0;
    if !(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= nyquist) {
        return Err(Error::Config(format!(
            "mel range must satisfy 0 <= fmin < fmax <= {nyquist}, got [{fmin_hz}, {fmax_hz}]"
        )));
    }
    if n_mels == 0 || frame_len < 2 {
        return Err(Error::Config("need at least one mel band and frame_len >= 2".into()));
    }
    let n_bins = frame_len / 2 + 1;
    if n_mels > n_bins {
        return Err(Error::Config(format!(
            "{n_mels} mel bands exceed the {n_bins} FFT bins of a {frame_len}-sample frame"
        )));
    }
    let bin_hz = sample_rate_hz as f64 / frame_len as f64;
    let (mlo, mhi) = (hz_to_mel(fmin_hz), hz_to_mel(fmax_hz));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let mut weights = vec![0.0; n_mels * n_bins];
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (hi - lo);
        let row = &mut weights[m * n_bins..(m + 1) * n_bins];
        for (b, w) in row.iter_mut().enumerate() {
            let f = b as f64 * bin_hz;
            let (a, z) = (f - bin_hz / 2.0, f + bin_hz / 2.0);
            let area = triangle_integral(z, lo, center, hi) - triangle_integral(a, lo, center, hi);
            *w = norm * area / bin_hz;
        }
    }
    Ok(MelFilterbank {
        weights,
        n_mels,
        n_bins,
        frame_len,
        sample_rate_hz,
        fmin_hz,
        fmax_hz,
    })
}

/// Row-major `[n_frames × n_mels]` natural-log mel energies.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMel {
    pub values: Vec<f32>,
    pub n_frames: usize,
    pub n_mels: usize,
}

pub fn mel_energies(s: &PowerSpectrogram, fb: &MelFilterbank) -> Result<Vec<f64>> {
    if fb.n_bins != s.n_bins || fb.frame_len != s.frame_len || fb.sample_rate_hz != s.sample_rate_hz {
        return Err(Error::Dimension(format!(
            "filterbank built for {} bins at {} Hz, spectrogram has {} bins at {} Hz",
            fb.n_bins, fb.sample_rate_hz, s.n_bins, s.sample_rate_hz
        )));
    }
    let mut out = Vec::with_capacity(s.n_frames * fb.n_mels);
    for t in 0..s.n_frames {
        let frame = s.frame(t);
        for m in 0..fb.n_mels {
            out.push(fb.row(m).iter().zip(frame).map(|(w, p)| w * p).sum());
        }
    }
    Ok(out)
}

pub fn log_mel(s: &PowerSpectrogram, fb: &MelFilterbank, eps_floor: f64) -> Result<LogMel> {
    let values = mel_energies(s, fb)?
        .into_iter()
        .map(|e| e.max(eps_floor).ln() as f32)
        .collect();
    Ok(LogMel {
        values,
        n_frames: s.n_frames,
        n_mels: fb.n_mels,
    })
}

/// A `[frames × mels × 1]` patch, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelPatch {
    pub values: Vec<f32>,
    pub frames: usize,
    pub mels: usize,
}

impl LogMelPatch {
    pub fn shape(&self) -> [usize; 3] {
        [self.frames, self.mels, 1]
    }
}

/// Contiguous `n_frames`-long window from a random start. Inputs shorter
/// than the window are tiled by wrap-around first.
pub fn select_patch<R: Rng + ?Sized>(logmel: &LogMel, n_frames: usize, rng: &mut R) -> Result<LogMelPatch> {
    if logmel.n_frames == 0 || logmel.values.is_empty() {
        return Err(Error::Empty("log-mel matrix has no frames".into()));
    }
    let t = logmel.n_frames;
    let m = logmel.n_mels;
    let start = if t > n_frames { rng.gen_range(0..=t - n_frames) } else { 0 };
    let mut values = Vec::with_capacity(n_frames * m);
    for i in 0..n_frames {
        let src = (start + i) % t;
        values.extend_from_slice(&logmel.values[src * m..(src + 1) * m]);
    }
    Ok(LogMelPatch {
        values,
        frames: n_frames,
        mels: m,
    })
}

/// Parameters of the whole waveform → log-mel chain.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub sample_rate_hz: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub eps_floor: f64,
    pub patch_frames: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 44_100,
            frame_len: DEFAULT_FRAME_LEN,
            hop: DEFAULT_FRAME_LEN,
            n_mels: DEFAULT_N_MELS,
            fmin_hz: 0.0,
            fmax_hz: 22_050.0,
            eps_floor: DEFAULT_EPS_FLOOR,
            patch_frames: DEFAULT_PATCH_FRAMES,
        }
    }
}

/// Reusable extractor holding the filterbank for one configuration.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    fb: MelFilterbank,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self> {
        let fb = mel_filterbank(cfg.n_mels, cfg.frame_len, cfg.sample_rate_hz, cfg.fmin_hz, cfg.fmax_hz)?;
        Ok(Self { cfg, fb })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    /// Resample to the configured rate, zero-pad clips shorter than one
    /// frame, then compute the log-mel matrix.
    pub fn log_mel(&self, w: &Waveform) -> Result<LogMel> {
        let w = crate::audio::resample(w, self.cfg.sample_rate_hz)?;
        let w = if w.len() < self.cfg.frame_len {
            w.fit_length(self.cfg.frame_len)?
        } else {
            w
        };
        let spec = stft_power(&w, self.cfg.frame_len, self.cfg.hop)?;
        log_mel(&spec, &self.fb, self.cfg.eps_floor)
    }
}

const LMEL_MAGIC: &[u8; 4] = b"LMEL";
const LMEL_VERSION: u32 = 1;

/// Write matrices of identical shape as a little-endian f32 container.
pub fn write_lmel(path: impl AsRef<Path>, mats: &[LogMel]) -> Result<()> {
    let path = path.as_ref();
    let (rows, cols) = mats.first().map_or((0, 0), |m| (m.n_frames, m.n_mels));
    if mats.iter().any(|m| m.n_frames != rows || m.n_mels != cols) {
        return Err(Error::Dimension("all matrices in one dump must share a shape".into()));
    }
    let mut buf = Vec::with_capacity(20 + mats.len() * rows * cols * 4);
    buf.extend_from_slice(LMEL_MAGIC);
    for v in [LMEL_VERSION, mats.len() as u32, rows as u32, cols as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for m in mats {
        for v in &m.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_lmel(path: impl AsRef<Path>) -> Result<Vec<LogMel>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[..4] != LMEL_MAGIC {
        return Err(Error::Decode {
            offset: 0,
            message: "missing LMEL header".into(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (version, n, rows, cols) = (word(0), word(1), word(2), word(3));
    if version != LMEL_VERSION as usize {
        return Err(Error::UnsupportedFormat(format!("LMEL version {version}")));
    }
    let need = n
        .checked_mul(rows)
        .and_then(|x| x.checked_mul(cols))
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::Decode {
            offset: 8,
            message: "header sizes overflow".into(),
        })?;
    if bytes.len() - 20 != need {
        return Err(Error::Decode {
            offset: 20,
            message: format!("payload is {} bytes, header implies {need}", bytes.len() - 20),
        });
    }
    let floats: Vec<f32> = bytes[20..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(floats
        .chunks(rows * cols.max(1))
        .take(n)
        .map(|c| LogMel {
            values: c.to_vec(),
            n_frames: rows,
            n_mels: cols,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frame_count_for_four_seconds() {
        let w = Waveform::silence(176_400, 44_100).unwrap();
        let s = stft_power(&w, 1024, 1024).unwrap();
        assert_eq!(s.n_frames, 172);
        assert_eq!(s.n_bins, 513);
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_signal_is_rejected() {
        let w = Waveform::silence(1000, 44_100).unwrap();
        assert!(matches!(
            stft_power(&w, 1024, 1024),
            Err(Error::InputTooShort { needed: 1024, got: 1000 })
        ));
    }

    #[test]
    fn mel_scale_reference_point() {
        assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn filterbank_shape_and_support() {
        let fb = mel_filterbank(128, 1024, 44_100, 0.0, 22_050.0).unwrap();
        assert_eq!(fb.weights.len(), 128 * 513);
        for m in 0..128 {
            assert!(fb.row(m).iter().any(|&w| w > 0.0), "band {m} empty");
        }
        let centers: Vec<usize> = (0..128)
            .map(|m| {
                let r = fb.row(m);
                (0..513).max_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap()).unwrap()
            })
            .collect();
        assert!(centers.windows(2).all(|c| c[0] <= c[1]));
    }

    #[test]
    fn first_filter_starts_at_fmin() {
        let fb = mel_filterbank(40, 1024, 44_100, 1000.0, 8000.0).unwrap();
        let bin_hz = 44_100.0 / 1024.0;
        let first = fb.row(0).iter().position(|&w| w > 0.0).unwrap();
        let f = first as f64 * bin_hz;
        assert!(f - bin_hz / 2.0 <= 1000.0 && 1000.0 < f + bin_hz / 2.0);
    }

    #[test]
    fn too_many_bands_is_config_error() {
        assert!(matches!(mel_filterbank(400, 256, 44_100, 0.0, 22_050.0), Err(Error::Config(_))));
        assert!(matches!(mel_filterbank(10, 1024, 44_100, 100.0, 50.0), Err(Error::Config(_))));
    }

    #[test]
    fn zero_spectrogram_hits_floor() {
        let w = Waveform::silence(4096, 44_100).unwrap();
        let s = stft_power(&w, 1024, 1024).unwrap();
        let fb = mel_filterbank(128, 1024, 44_100, 0.0, 22_050.0).unwrap();
        let lm = log_mel(&s, &fb, 1e-6).unwrap();
        assert!(lm.values.iter().all(|&v| (v as f64 - (-13.815_510_557_964_274)).abs() < 1e-5));
    }

    #[test]
    fn mismatched_filterbank_is_dimension_error() {
        let w = Waveform::silence(4096, 44_100).unwrap();
        let s = stft_power(&w, 512, 512).unwrap();
        let fb = mel_filterbank(40, 1024, 44_100, 0.0, 22_050.0).unwrap();
        assert!(matches!(log_mel(&s, &fb, 1e-6), Err(Error::Dimension(_))));
    }

    fn ramp(frames: usize, mels: usize) -> LogMel {
        LogMel {
            values: (0..frames * mels).map(|v| v as f32).collect(),
            n_frames: frames,
            n_mels: mels,
        }
    }

    #[test]
    fn exact_length_patch_is_input() {
        let lm = ramp(128, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(select_patch(&lm, 128, &mut rng).unwrap().values, lm.values);
    }

    #[test]
    fn short_input_wraps() {
        let lm = ramp(100, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = select_patch(&lm, 128, &mut rng).unwrap();
        assert_eq!(&p.values[..200], &lm.values[..]);
        assert_eq!(&p.values[200..], &lm.values[..56]);
    }

    #[test]
    fn patch_start_is_seed_determined() {
        let lm = ramp(172, 1);
        let a = select_patch(&lm, 128, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = select_patch(&lm, 128, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let start = a.values[0] as usize;
        assert!(start <= 44);
        assert!(select_patch(&ramp(0, 1), 128, &mut ChaCha8Rng::seed_from_u64(9)).is_err());
    }

    #[test]
    fn lmel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.lmel");
        let mats = vec![ramp(3, 2), ramp(3, 2)];
        write_lmel(&path, &mats).unwrap();
        assert_eq!(read_lmel(&path).unwrap(), mats);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"LMEL");
        assert_eq!(bytes.len(), 20 + 2 * 6 * 4);
    }
}
