// Each classical augmentation applied to one tone, with the measured effect.

use envgan::audio::Waveform;
use envgan::augment::{compress_dynamic_range, mix_background, pitch_shift, time_stretch, DrcProfile};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const SR: u32 = 44_100;

fn tone(freq: f64, amp: f64, len: usize) -> Waveform {
    let s = (0..len)
        .map(|n| (amp * (2.0 * std::f64::consts::PI * freq * n as f64 / SR as f64).sin()) as f32)
        .collect();
    Waveform::new(s, SR).expect("finite samples")
}

fn peak_hz(w: &Waveform) -> f64 {
    let n = (w.len() * 2).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = w.samples().iter().map(|&x| Complex::new(x as f64, 0.0)).collect();
    buf.resize(n, Complex::default());
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k = (1..n / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap_or(0);
    k as f64 * SR as f64 / n as f64
}

fn rms_db(w: &Waveform) -> f64 {
    let ms = w.samples().iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / w.len() as f64;
    10.0 * ms.max(1e-20).log10()
}

fn main() -> envgan::Result<()> {
    let x = tone(440.0, 0.5, SR as usize);
    println!("input: {} samples, peak {:.1} Hz, {:.1} dB RMS", x.len(), peak_hz(&x), rms_db(&x));

    for rate in [0.85, 1.15] {
        let y = time_stretch(&x, rate)?;
        println!("time_stretch {rate}: {} samples, peak {:.1} Hz", y.len(), peak_hz(&y));
    }
    for semis in [-2.0, 1.5] {
        let y = pitch_shift(&x, semis)?;
        println!("pitch_shift {semis:+}: {} samples, peak {:.1} Hz", y.len(), peak_hz(&y));
    }
    for name in ["speech", "music"] {
        let y = compress_dynamic_range(&x, &DrcProfile::named(name)?)?;
        println!("drcomp {name}: {:.1} dB RMS", rms_db(&y));
    }
    let hum = tone(60.0, 0.3, 10_000);
    let y = mix_background(&x, &hum, 0.3)?;
    println!("background w=0.3: {:.1} dB RMS, peak {:.3}", rms_db(&y), y.peak());
    Ok(())
}
