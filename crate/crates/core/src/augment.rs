//! Classical waveform augmentation: phase-vocoder time stretching, pitch
//! shifting, dynamic range compression and background mixing.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::{resample, resample::resample_to_len, Waveform};
use crate::dataset::{LabeledClip, Origin};
use crate::error::{Error, Result};
use crate::features::hann;

pub const PV_FRAME: usize = 2048;
pub const PV_HOP: usize = 256;

pub const TIME_STRETCH_RATES: [f64; 4] = [0.85, 0.95, 1.05, 1.15];
pub const PITCH_SHIFT_1: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
pub const PITCH_SHIFT_2: [f64; 4] = [-1.5, -0.5, 0.5, 1.5];
pub const BACKGROUND_W: (f64, f64) = (0.1, 0.5);

/// Phase-vocoder time stretch. `rate > 1` shortens the clip; the output has
/// `round(len / rate)` samples.
pub fn time_stretch(w: &Waveform, rate: f64) -> Result<Waveform> {
    if !(rate > 0.5 && rate < 2.0) {
        return Err(Error::Parameter(format!("stretch rate {rate} outside (0.5, 2.0)")));
    }
    Waveform::new(stretch_samples(w.samples(), rate), w.sample_rate_hz())
}

fn stretch_samples(x: &[f32], rate: f64) -> Vec<f32> {
    let out_len = (x.len() as f64 / rate).round() as usize;
    if x.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let n_fft = PV_FRAME;
    let half = n_fft / 2;
    let n_bins = half + 1;
    let win = hann(n_fft);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n_fft);
    let inv = planner.plan_fft_inverse(n_fft);

    // centred frames over the zero-padded signal
    let padded_len = x.len() + n_fft;
    let n_frames = 1 + (padded_len - n_fft).div_ceil(PV_HOP);
    let sample = |i: isize| -> f64 {
        if i < 0 || i as usize >= x.len() {
            0.0
        } else {
            x[i as usize] as f64
        }
    };
    let mut spec: Vec<Vec<Complex<f64>>> = Vec::with_capacity(n_frames + 1);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        let start = (t * PV_HOP) as isize - half as isize;
        for (j, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(sample(start + j as isize) * win[j], 0.0);
        }
        fwd.process(&mut buf);
        spec.push(buf[..n_bins].to_vec());
    }
    spec.push(vec![Complex::new(0.0, 0.0); n_bins]);

    let omega: Vec<f64> = (0..n_bins).map(|k| 2.0 * PI * PV_HOP as f64 * k as f64 / n_fft as f64).collect();
    let mut phase: Vec<f64> = spec[0].iter().map(|c| c.arg()).collect();
    let mut out = vec![0.0f64; out_len + n_fft + PV_HOP];
    let mut norm = vec![0.0f64; out.len()];
    let mut step = 0usize;
    loop {
        let t = step as f64 * rate;
        if t >= n_frames as f64 {
            break;
        }
        let left = t.floor() as usize;
        let alpha = t - left as f64;
        let (a, b) = (&spec[left], &spec[left + 1]);
        for k in 0..n_bins {
            let mag = (1.0 - alpha) * a[k].norm() + alpha * b[k].norm();
            buf[k] = Complex::from_polar(mag, phase[k]);
            let dphi = b[k].arg() - a[k].arg() - omega[k];
            let wrapped = dphi - 2.0 * PI * (dphi / (2.0 * PI)).round();
            phase[k] += omega[k] + wrapped;
        }
        for k in 1..half {
            buf[n_fft - k] = buf[k].conj();
        }
        inv.process(&mut buf);
        let pos = step * PV_HOP;
        if pos >= out.len() {
            break;
        }
        for j in 0..n_fft {
            let idx = pos + j;
            if idx >= out.len() {
                break;
            }
            out[idx] += buf[j].re / n_fft as f64 * win[j];
            norm[idx] += win[j] * win[j];
        }
        step += 1;
    }
    let floor = 1e-8;
    (0..out_len)
        .map(|n| {
            let i = n + half;
            let d = norm.get(i).copied().unwrap_or(0.0);
            let v = out.get(i).copied().unwrap_or(0.0);
            (if d > floor { v / d } else { v }) as f32
        })
        .collect()
}

/// Shift pitch by `semitones` while keeping the length exactly.
pub fn pitch_shift(w: &Waveform, semitones: f64) -> Result<Waveform> {
    if !(semitones.abs() <= 12.0) {
        return Err(Error::Parameter(format!("pitch shift {semitones} outside ±12 semitones")));
    }
    if semitones == 0.0 {
        return Ok(w.clone());
    }
    let rate = 2f64.powf(-semitones / 12.0);
    let stretched = stretch_samples(w.samples(), rate);
    Waveform::new(resample_to_len(&stretched, w.len()), w.sample_rate_hz())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrcProfile {
    pub name: String,
    pub threshold_db: f64,
    pub ratio: f64,
    pub knee_db: f64,
    pub attack_ms: f64,
    pub release_ms: f64,
    pub makeup_gain_db: f64,
}

pub const DRC_PROFILE_NAMES: [&str; 4] = ["speech", "podcast", "music", "voice_radio"];

impl DrcProfile {
    pub fn named(name: &str) -> Result<Self> {
        let (t, r, k, a, rel, m) = match name {
            "speech" => (-20.0, 4.0, 6.0, 5.0, 100.0, 6.0),
            "podcast" => (-24.0, 3.0, 6.0, 10.0, 150.0, 8.0),
            "music" => (-16.0, 2.5, 9.0, 15.0, 250.0, 4.0),
            "voice_radio" => (-18.0, 6.0, 3.0, 3.0, 80.0, 9.0),
            _ => return Err(Error::Parameter(format!("unknown compression profile {name:?}"))),
        };
        Ok(Self {
            name: name.into(),
            threshold_db: t,
            ratio: r,
            knee_db: k,
            attack_ms: a,
            release_ms: rel,
            makeup_gain_db: m,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio >= 1.0) || !(self.attack_ms > 0.0) || !(self.release_ms > 0.0) || !(self.knee_db >= 0.0) {
            return Err(Error::Parameter(format!("invalid compression profile {:?}", self.name)));
        }
        Ok(())
    }

    /// Static gain curve: output level for input level, both in dB.
    pub fn static_curve(&self, level_db: f64) -> f64 {
        let (t, r, w) = (self.threshold_db, self.ratio, self.knee_db);
        let over = level_db - t;
        if 2.0 * over < -w {
            level_db
        } else if 2.0 * over.abs() <= w && w > 0.0 {
            level_db + (1.0 / r - 1.0) * (over + w / 2.0).powi(2) / (2.0 * w)
        } else {
            t + over / r
        }
    }
}

pub const DRC_RMS_WINDOW_MS: f64 = 10.0;

/// Feed-forward compressor: 10 ms RMS detector, soft-knee gain computer,
/// attack/release smoothing of the gain, makeup gain. Levels are RMS dBFS.
pub fn compress_dynamic_range(w: &Waveform, profile: &DrcProfile) -> Result<Waveform> {
    profile.validate()?;
    let fs = w.sample_rate_hz() as f64;
    let win = ((DRC_RMS_WINDOW_MS * 1e-3 * fs).round() as usize).max(1);
    let coef = |ms: f64| (-1.0 / (ms * 1e-3 * fs)).exp();
    let (a_att, a_rel) = (coef(profile.attack_ms), coef(profile.release_ms));
    let makeup = profile.makeup_gain_db;
    let x = w.samples();
    let mut sum_sq = 0.0f64;
    let mut g_s = 0.0f64;
    let mut out = Vec::with_capacity(x.len());
    for (n, &s) in x.iter().enumerate() {
        sum_sq += (s as f64).powi(2);
        if n >= win {
            sum_sq -= (x[n - win] as f64).powi(2);
        }
        let ms = (sum_sq.max(0.0) / win.min(n + 1) as f64).max(1e-20);
        let level = 10.0 * ms.log10();
        let g = profile.static_curve(level) - level;
        let a = if g < g_s { a_att } else { a_rel };
        g_s = a * g_s + (1.0 - a) * g;
        out.push((s as f64 * 10f64.powf((g_s + makeup) / 20.0)) as f32);
    }
    Waveform::new(out, w.sample_rate_hz())
}

/// `z = x + w·y`, with `y` looped or trimmed to `len(x)`, peak-normalised
/// only if `|z|` would exceed 1.
pub fn mix_background(x: &Waveform, y: &Waveform, w: f64) -> Result<Waveform> {
    if x.sample_rate_hz() != y.sample_rate_hz() {
        return Err(Error::Parameter(format!(
            "background rate {} differs from clip rate {}",
            y.sample_rate_hz(),
            x.sample_rate_hz()
        )));
    }
    let ys = y.samples();
    let mut z: Vec<f64> = x
        .samples()
        .iter()
        .enumerate()
        .map(|(n, &a)| a as f64 + w * ys[n % ys.len()] as f64)
        .collect();
    let peak = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 1.0 {
        z.iter_mut().for_each(|v| *v /= peak);
    }
    Waveform::new(z.into_iter().map(|v| v as f32).collect(), x.sample_rate_hz())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    TimeStretch,
    PitchShift1,
    PitchShift2,
    DrComp,
    Background,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::TimeStretch,
        SchemeKind::PitchShift1,
        SchemeKind::PitchShift2,
        SchemeKind::DrComp,
        SchemeKind::Background,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::TimeStretch => "time_stretch",
            SchemeKind::PitchShift1 => "pitch_shift1",
            SchemeKind::PitchShift2 => "pitch_shift2",
            SchemeKind::DrComp => "drcomp",
            SchemeKind::Background => "background",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.as_str().replace("shift", "shift_") == s)
            .ok_or_else(|| Error::Parameter(format!("unknown augmentation scheme {s:?}")))
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One augmentation setting applied to a clip.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Rate(f64),
    Semitones(f64),
    Profile(DrcProfile),
    /// Index into the scheme's scene list.
    Scene(usize),
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Rate(r) => write!(f, "{r}"),
            Factor::Semitones(s) => write!(f, "{s}"),
            Factor::Profile(p) => f.write_str(&p.name),
            Factor::Scene(i) => write!(f, "scene_{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationScheme {
    pub kind: SchemeKind,
    pub factors: Vec<Factor>,
    /// Background scenes, resampled to the clip rate on use.
    pub scenes: Vec<Waveform>,
}

impl AugmentationScheme {
    pub fn time_stretch() -> Self {
        Self::simple(SchemeKind::TimeStretch, TIME_STRETCH_RATES.iter().map(|&r| Factor::Rate(r)).collect())
    }

    pub fn pitch_shift_1() -> Self {
        Self::simple(SchemeKind::PitchShift1, PITCH_SHIFT_1.iter().map(|&s| Factor::Semitones(s)).collect())
    }

    pub fn pitch_shift_2() -> Self {
        Self::simple(SchemeKind::PitchShift2, PITCH_SHIFT_2.iter().map(|&s| Factor::Semitones(s)).collect())
    }

    pub fn drcomp(profiles: Vec<DrcProfile>) -> Self {
        Self::simple(SchemeKind::DrComp, profiles.into_iter().map(Factor::Profile).collect())
    }

    pub fn drcomp_default() -> Self {
        Self::drcomp(DRC_PROFILE_NAMES.iter().map(|n| DrcProfile::named(n).unwrap()).collect())
    }

    pub fn background(scenes: Vec<Waveform>) -> Result<Self> {
        if scenes.len() != 4 {
            return Err(Error::Config(format!("background scheme needs 4 scenes, got {}", scenes.len())));
        }
        Ok(Self {
            kind: SchemeKind::Background,
            factors: (0..4).map(Factor::Scene).collect(),
            scenes,
        })
    }

    fn simple(kind: SchemeKind, factors: Vec<Factor>) -> Self {
        Self { kind, factors, scenes: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for f in &self.factors {
            match (self.kind, f) {
                (SchemeKind::TimeStretch, Factor::Rate(r)) if *r > 0.5 && *r < 2.0 => {}
                (SchemeKind::PitchShift1 | SchemeKind::PitchShift2, Factor::Semitones(s)) if s.abs() <= 12.0 => {}
                (SchemeKind::DrComp, Factor::Profile(p)) => p.validate()?,
                (SchemeKind::Background, Factor::Scene(i)) if *i < self.scenes.len() => {}
                (SchemeKind::Background, Factor::Scene(_)) => {
                    return Err(Error::Config("background scene missing".into()))
                }
                _ => return Err(Error::Parameter(format!("factor {f} does not fit scheme {}", self.kind))),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source_id: String,
    pub scheme: SchemeKind,
    pub factor: String,
    /// Background weight, for the background scheme.
    pub w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedClip {
    pub clip: LabeledClip,
    pub provenance: Provenance,
}

/// Apply one factor to a waveform; `w` is the background weight.
pub fn apply_factor(scheme: &AugmentationScheme, factor: &Factor, x: &Waveform, w: f64) -> Result<Waveform> {
    match factor {
        Factor::Rate(r) => time_stretch(x, *r),
        Factor::Semitones(s) => pitch_shift(x, *s),
        Factor::Profile(p) => compress_dynamic_range(x, p),
        Factor::Scene(i) => {
            let scene = scheme
                .scenes
                .get(*i)
                .ok_or_else(|| Error::Config(format!("background scene {} missing", i + 1)))?;
            let scene = resample(scene, x.sample_rate_hz())?;
            mix_background(x, &scene, w)
        }
    }
}

/// Every clip yields one augmented copy per factor, keeping its label and
/// fold. The background weight is drawn uniformly from [0.1, 0.5].
pub fn build_augmented_set(clips: &[LabeledClip], scheme: &AugmentationScheme, rng: &mut impl Rng) -> Result<Vec<AugmentedClip>> {
    scheme.validate()?;
    let mut out = Vec::with_capacity(clips.len() * scheme.factors.len());
    for clip in clips {
        for factor in &scheme.factors {
            let w = match factor {
                Factor::Scene(_) => Some(rng.gen_range(BACKGROUND_W.0..=BACKGROUND_W.1)),
                _ => None,
            };
            let waveform = apply_factor(scheme, factor, &clip.waveform, w.unwrap_or(0.0))?;
            let factor_s = factor.to_string();
            out.push(AugmentedClip {
                clip: LabeledClip {
                    id: format!("{}__{}_{}", clip.id, scheme.kind, factor_s),
                    label: clip.label,
                    fold: clip.fold,
                    origin: Origin::ClassicalAug,
                    waveform,
                },
                provenance: Provenance {
                    source_id: clip.id.clone(),
                    scheme: scheme.kind,
                    factor: factor_s,
                    w,
                },
            });
        }
    }
    Ok(out)
}

/// One row per augmented file: `source_file,output_file,scheme,factor,w`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentManifestRow {
    pub source_file: String,
    pub output_file: String,
    pub scheme: SchemeKind,
    pub factor: String,
    pub w: Option<f64>,
}

pub fn write_augment_manifest(path: impl AsRef<Path>, rows: &[AugmentManifestRow]) -> Result<()> {
    let path = path.as_ref();
    let mut wr = csv::Writer::from_path(path)?;
    wr.write_record(["source_file", "output_file", "scheme", "factor", "w"])?;
    for r in rows {
        wr.write_record([
            r.source_file.as_str(),
            &r.output_file,
            r.scheme.as_str(),
            &r.factor,
            &r.w.map(|w| format!("{w:.6}")).unwrap_or_default(),
        ])?;
    }
    wr.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SR: u32 = 44_100;

    fn sine(freq: f64, len: usize, amp: f64) -> Waveform {
        Waveform::new(
            (0..len).map(|n| (amp * (2.0 * PI * freq * n as f64 / SR as f64).sin()) as f32).collect(),
            SR,
        )
        .unwrap()
    }

    /// Peak of a zero-padded DFT magnitude, refined by parabolic interpolation.
    fn peak_hz(w: &Waveform) -> f64 {
        let n = (w.len() * 4).next_power_of_two();
        let mut buf: Vec<Complex<f64>> = w.samples().iter().map(|&x| Complex::new(x as f64, 0.0)).collect();
        buf.resize(n, Complex::new(0.0, 0.0));
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let mags: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm()).collect();
        let k = (1..n / 2 - 1).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap();
        let (a, b, c) = (mags[k - 1], mags[k], mags[k + 1]);
        let off = 0.5 * (a - c) / (a - 2.0 * b + c);
        (k as f64 + off) * SR as f64 / n as f64
    }

    #[test]
    fn stretch_lengths_and_pitch() {
        let x = sine(440.0, 44_100, 0.5);
        let y = time_stretch(&x, 1.05).unwrap();
        assert!((y.len() as i64 - 42_000).abs() <= 2048);
        assert!((peak_hz(&y) / 440.0 - 1.0).abs() < 0.01);
        let y = time_stretch(&x, 0.85).unwrap();
        assert_eq!(y.len(), (44_100.0f64 / 0.85).round() as usize);
        assert!((peak_hz(&y) / 440.0 - 1.0).abs() < 0.01);
        let y = time_stretch(&x, 1.0).unwrap();
        assert_eq!(y.len(), x.len());
        assert!(time_stretch(&x, 2.0).is_err());
        assert!(time_stretch(&x, 0.5).is_err());
    }

    #[test]
    fn identity_rate_reconstructs_signal() {
        let x = sine(440.0, 8192, 0.5);
        let y = time_stretch(&x, 1.0).unwrap();
        let err = x.samples()[2048..6000]
            .iter()
            .zip(&y.samples()[2048..6000])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn pitch_shift_moves_tone() {
        let x = sine(440.0, 44_100, 0.5);
        for (s, f) in [(12.0, 880.0), (-1.5, 440.0 * 2f64.powf(-1.5 / 12.0)), (0.0, 440.0)] {
            let y = pitch_shift(&x, s).unwrap();
            assert_eq!(y.len(), x.len());
            assert!((peak_hz(&y) / f - 1.0).abs() < 0.01, "{s}: {}", peak_hz(&y));
        }
        assert!(pitch_shift(&x, 12.5).is_err());
    }

    #[test]
    fn compression_examples() {
        let p = DrcProfile::named("speech").unwrap();
        let silent = compress_dynamic_range(&Waveform::silence(1000, SR).unwrap(), &p).unwrap();
        assert!(silent.samples().iter().all(|&s| s == 0.0));

        // steady sine whose RMS sits at the threshold
        let amp = 10f64.powf(p.threshold_db / 20.0) * 2f64.sqrt();
        let y = compress_dynamic_range(&sine(1000.0, 44_100, amp), &p).unwrap();
        let tail = &y.samples()[22_050..];
        let rms = (tail.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / tail.len() as f64).sqrt();
        let expect = p.static_curve(p.threshold_db) + p.makeup_gain_db;
        assert!((20.0 * rms.log10() - expect).abs() < 0.1, "{}", 20.0 * rms.log10());
        assert!(DrcProfile::named("loud").is_err());
    }

    #[test]
    fn static_curve_regions() {
        let p = DrcProfile::named("speech").unwrap();
        assert_eq!(p.static_curve(-40.0), -40.0);
        assert_eq!(p.static_curve(0.0), -20.0 + 20.0 / 4.0);
        assert!((p.static_curve(-20.0) - (-20.0 - 0.75 * 9.0 / 12.0)).abs() < 1e-12);
    }

    #[test]
    fn mixing_examples() {
        let x = Waveform::new(vec![0.2, -0.1], SR).unwrap();
        let y = Waveform::new(vec![0.5, 0.5], SR).unwrap();
        let z = mix_background(&x, &y, 0.4).unwrap();
        assert!((z.samples()[0] - 0.4).abs() < 1e-7 && (z.samples()[1] - 0.1).abs() < 1e-7);
        assert_eq!(mix_background(&x, &y, 0.0).unwrap(), x);
        let loud = Waveform::new(vec![0.9, 0.0, 0.0], SR).unwrap();
        let z = mix_background(&loud, &Waveform::new(vec![1.0], SR).unwrap(), 0.5).unwrap();
        assert!((z.peak() - 1.0).abs() < 1e-6);
        assert!(mix_background(&x, &Waveform::new(vec![0.5], 8000).unwrap(), 0.1).is_err());
    }

    #[test]
    fn augmented_set_counts_and_labels() {
        let clip = |i: usize| LabeledClip {
            id: format!("c{i}"),
            label: i % 2,
            fold: 1 + (i % 10) as u8,
            origin: Origin::Original,
            waveform: sine(300.0 + i as f64, 4096, 0.3),
        };
        let clips: Vec<_> = (0..5).map(clip).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scenes: Vec<_> = (0..4).map(|i| sine(50.0 * (i + 1) as f64, 1000, 0.2)).collect();
        for scheme in [
            AugmentationScheme::time_stretch(),
            AugmentationScheme::pitch_shift_1(),
            AugmentationScheme::pitch_shift_2(),
            AugmentationScheme::drcomp_default(),
            AugmentationScheme::background(scenes.clone()).unwrap(),
        ] {
            let out = build_augmented_set(&clips, &scheme, &mut rng).unwrap();
            assert_eq!(out.len(), 20);
            for a in &out {
                let src = clips.iter().find(|c| c.id == a.provenance.source_id).unwrap();
                assert_eq!((a.clip.label, a.clip.fold), (src.label, src.fold));
                if let Some(w) = a.provenance.w {
                    assert!((0.1..=0.5).contains(&w));
                }
            }
        }
        let out = build_augmented_set(&clips[..1], &AugmentationScheme::pitch_shift_1(), &mut rng).unwrap();
        let factors: Vec<_> = out.iter().map(|a| a.provenance.factor.as_str()).collect();
        assert_eq!(factors, ["-2", "-1", "1", "2"]);
        assert!(build_augmented_set(&[], &AugmentationScheme::time_stretch(), &mut rng).unwrap().is_empty());
        assert!(AugmentationScheme::background(scenes[..3].to_vec()).is_err());
    }
}
