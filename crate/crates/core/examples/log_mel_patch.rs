// Log-mel features of a chirp and a random 128-frame patch.

use envgan::audio::Waveform;
use envgan::features::{select_patch, FeatureConfig, FeatureExtractor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> envgan::Result<()> {
    let sr = 44_100u32;
    let len = 4 * sr as usize;
    // linear chirp 200 Hz -> 8 kHz over four seconds
    let chirp: Vec<f32> = (0..len)
        .map(|n| {
            let t = n as f64 / sr as f64;
            (0.4 * (2.0 * std::f64::consts::PI * (200.0 * t + 975.0 * t * t)).sin()) as f32
        })
        .collect();
    let w = Waveform::new(chirp, sr)?;

    let fx = FeatureExtractor::new(FeatureConfig::default())?;
    let lm = fx.log_mel(&w)?;
    println!("{} frames x {} mel bands", lm.n_frames, lm.n_mels);

    for t in (0..lm.n_frames).step_by(43) {
        let row = &lm.values[t * lm.n_mels..][..lm.n_mels];
        let (band, level) = row
            .iter()
            .enumerate()
            .fold((0, f32::MIN), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        println!("  frame {t:3}: loudest band {band:3} ({level:.2})");
    }

    let patch = select_patch(&lm, 128, &mut ChaCha8Rng::seed_from_u64(7))?;
    println!("patch shape {:?}", patch.shape());
    Ok(())
}
