// Train the reduced-size GAN on sine bursts of one frequency, then generate
// clips, check their pitch, and filter near-copies.
//
// cargo run --release --example gan_sine_bursts [-- epochs]

use envgan::config::PipelineConfig;
use envgan::gan::train_gan_with;
use envgan::simfilter::{filter_generated, FilterConfig};
use envgan::synth::sine_burst;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn peak_hz(x: &[f32], sr: f64) -> f64 {
    let n = 4096;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&s| Complex::new(s as f64, 0.0)).collect();
    buf.resize(n, Complex::default());
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k = (1..n / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap_or(0);
    k as f64 * sr / n as f64
}

fn main() -> envgan::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let cfg = PipelineConfig::desk();
    let arch = cfg.arch.clone();
    let train_cfg = envgan::gan::GanTrainConfig { epochs, ..cfg.gan.clone() };
    let freq = 2000.0;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let clips = (0..64)
        .map(|_| sine_burst(freq, arch.output_len(), arch.sample_rate_hz, &mut rng))
        .collect::<envgan::Result<Vec<_>>>()?;

    let trained = train_gan_with(&clips, &arch, &train_cfg, |e| {
        if e.epoch == 1 || e.epoch % 20 == 0 {
            println!(
                "epoch {:4}  critic {:8.4}  generator {:8.4}  wasserstein {:8.4}",
                e.epoch, e.critic_loss, e.gen_loss, e.wasserstein
            );
        }
    })?;

    let generated = trained.gan.generate(50, &mut rng)?;
    let on_pitch = generated
        .iter()
        .filter(|w| (peak_hz(w.samples(), arch.sample_rate_hz as f64) / freq - 1.0).abs() <= 0.1)
        .count();
    println!("{on_pitch}/50 generated clips peak within 10% of {freq} Hz");

    let outcome = filter_generated(&generated, &clips, &FilterConfig::default())?;
    println!("filter: {} accepted, {} rejected", outcome.accepted.len(), outcome.rejected.len());
    Ok(())
}
