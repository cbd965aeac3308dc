// Write a tone to 16-bit WAV, read it back, and resample it.
//
// cargo run --example wav_roundtrip [-- out.wav]

use envgan::audio::{read_wav, resample, write_wav, Waveform};

fn main() -> envgan::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("envgan_tone.wav"));

    let sr = 44_100;
    let tone: Vec<f32> = (0..sr)
        .map(|n| 0.5 * (2.0 * std::f32::consts::PI * 440.0 * n as f32 / sr as f32).sin())
        .collect();
    let w = Waveform::new(tone, sr)?;
    write_wav(&w, &path)?;

    let back = read_wav(&path)?;
    let max_err = w
        .samples()
        .iter()
        .zip(back.samples())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    println!("{}: {} samples at {} Hz, max quantisation error {max_err:.2e}", path.display(), back.len(), back.sample_rate_hz());

    let low = resample(&back, 22_050)?;
    println!("resampled to {} Hz: {} samples, peak {:.3}", low.sample_rate_hz(), low.len(), low.peak());
    Ok(())
}
