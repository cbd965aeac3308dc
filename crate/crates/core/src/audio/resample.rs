//! Polyphase windowed-sinc resampling (Kaiser window, beta 8, 64 zero crossings).

use std::f64::consts::PI;

use super::Waveform;
use crate::error::{Error, Result};

const KAISER_BETA: f64 = 8.0;
const ZERO_CROSSINGS: f64 = 64.0;
const MAX_TABLE_PHASES: u64 = 1024;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

struct Kernel {
    cutoff: f64,
    half_width: f64,
    i0_beta: f64,
}

impl Kernel {
    fn new(cutoff: f64) -> Self {
        Self {
            cutoff,
            half_width: ZERO_CROSSINGS / cutoff,
            i0_beta: bessel_i0(KAISER_BETA),
        }
    }

    fn eval(&self, tau: f64) -> f64 {
        if tau.abs() >= self.half_width {
            return 0.0;
        }
        let r = tau / self.half_width;
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.i0_beta;
        let x = self.cutoff * tau;
        let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
        self.cutoff * sinc * window
    }
}

/// Resample to `target_rate_hz`. Output length is `round(len * target / source)`.
pub fn resample(w: &Waveform, target_rate_hz: u32) -> Result<Waveform> {
    if target_rate_hz == 0 {
        return Err(Error::Parameter("target sample rate must be positive".into()));
    }
    let source = w.sample_rate_hz() as u64;
    let target = target_rate_hz as u64;
    if source == target {
        return Ok(w.clone());
    }
    let g = gcd(source, target);
    let up = target / g;
    let down = source / g;

    let x = w.samples();
    let out_len = ((x.len() as u64 * target) as f64 / source as f64).round() as usize;
    let kernel = Kernel::new((target as f64 / source as f64).min(1.0));
    let reach = kernel.half_width.ceil() as i64;

    // Output n sits at input time n * down / up; its fractional phase repeats with period `up`.
    let table: Option<Vec<Vec<f64>>> = (up <= MAX_TABLE_PHASES).then(|| {
        (0..up)
            .map(|phase| {
                let frac = phase as f64 / up as f64;
                (-reach..=reach).map(|k| kernel.eval(frac - k as f64)).collect()
            })
            .collect()
    });

    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len as u64 {
        let num = n * down;
        let base = (num / up) as i64;
        let phase = num % up;
        let mut acc = 0.0f64;
        for (ti, k) in (-reach..=reach).enumerate() {
            let idx = base + k;
            if idx < 0 || idx as usize >= x.len() {
                continue;
            }
            let h = match &table {
                Some(t) => t[phase as usize][ti],
                None => kernel.eval(phase as f64 / up as f64 - k as f64),
            };
            acc += h * x[idx as usize] as f64;
        }
        out.push(acc as f32);
    }
    Waveform::new(out, target_rate_hz)
}

/// Resample `x` to exactly `out_len` samples by a fractional ratio; output
/// sample `n` sits at input time `n * x.len() / out_len`.
pub(crate) fn resample_to_len(x: &[f32], out_len: usize) -> Vec<f32> {
    if x.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    if out_len == x.len() {
        return x.to_vec();
    }
    let step = x.len() as f64 / out_len as f64;
    let kernel = Kernel::new((1.0 / step).min(1.0));
    let reach = kernel.half_width.ceil() as i64;
    // kernel sampled at 1/PHASES resolution, linearly interpolated
    const PHASES: usize = 512;
    let span = 2 * reach as usize + 1;
    let table: Vec<f64> = (0..=span * PHASES)
        .map(|i| kernel.eval(i as f64 / PHASES as f64 - reach as f64))
        .collect();
    let lookup = |tau: f64| {
        let pos = (tau + reach as f64) * PHASES as f64;
        if pos < 0.0 || pos >= (span * PHASES) as f64 {
            return 0.0;
        }
        let i = pos.floor() as usize;
        let a = pos - i as f64;
        table[i] * (1.0 - a) + table[i + 1] * a
    };
    (0..out_len)
        .map(|n| {
            let t = n as f64 * step;
            let base = t.floor() as i64;
            let mut acc = 0.0;
            for k in (base - reach)..=(base + reach + 1) {
                if k < 0 || k as usize >= x.len() {
                    continue;
                }
                acc += lookup(t - k as f64) * x[k as usize] as f64;
            }
            acc as f32
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_rate_doubles_length() {
        let w = Waveform::new(vec![0.1; 100], 22_050).unwrap();
        let r = resample(&w, 44_100).unwrap();
        assert_eq!(r.len(), 200);
        assert_eq!(r.sample_rate_hz(), 44_100);
    }

    #[test]
    fn identity_rate_is_bit_identical() {
        let w = Waveform::new(vec![0.25, -0.5, 0.125], 16_000).unwrap();
        assert_eq!(resample(&w, 16_000).unwrap(), w);
    }

    #[test]
    fn bessel_matches_reference() {
        // I0(1) = 1.2660658777520082
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_2).abs() < 1e-14);
    }

    #[test]
    fn fractional_ratio_preserves_slow_sine() {
        let x: Vec<f32> = (0..4000).map(|n| (n as f32 * 0.01).sin()).collect();
        let y = resample_to_len(&x, 3000);
        assert_eq!(y.len(), 3000);
        for n in 500..2500 {
            let expect = (n as f64 * 4000.0 / 3000.0 * 0.01).sin();
            assert!((y[n] as f64 - expect).abs() < 1e-3, "{n}");
        }
    }

    #[test]
    fn zero_target_rejected() {
        let w = Waveform::new(vec![0.0], 8000).unwrap();
        assert!(resample(&w, 0).is_err());
    }
}
