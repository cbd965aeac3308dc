// The whole file-based pipeline on a miniature synthetic dataset:
// ingest, classical augmentation, per-class GAN training, generation,
// filtering, one cross-validation fold and evaluation.
//
// cargo run --release --example pipeline_dry_run [-- out_dir]

use std::path::PathBuf;

use envgan::augment::SchemeKind;
use envgan::config::PipelineConfig;
use envgan::pipeline::{Pipeline, Scheme};
use envgan::synth::write_tone_dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> envgan::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("envgan_dry_run"));
    let data = out.join("dataset");
    let classes = [("low_hum", 700.0), ("whistle", 3000.0)];
    let csv = write_tone_dataset(&data, &classes, 20, 8192, 44_100, &mut ChaCha8Rng::seed_from_u64(0))?;

    let mut cfg = PipelineConfig::desk();
    cfg.gan.epochs = 20;
    cfg.clf.epochs = 3;
    let p = Pipeline::new(cfg, &out);

    let m = p.ingest(&data, &csv)?;
    println!("ingested {} clips", m.rows.len());
    for kind in [SchemeKind::TimeStretch, SchemeKind::PitchShift1, SchemeKind::PitchShift2, SchemeKind::DrComp] {
        println!("augment {kind}: {} clips", p.augment(kind)?);
    }
    for (class, _) in classes {
        let log = p.gan_train(class)?;
        let last = log.last().expect("at least one epoch");
        println!("gan-train {class}: wasserstein {:.4} after {} epochs", last.wasserstein, last.epoch);
        p.gan_generate(class, 50)?;
        let f = p.gan_filter(class)?;
        println!("gan-filter {class}: {} accepted", f.accepted.len());
    }
    p.clf_train(Scheme::Gan, &[1])?;
    let (row, _) = p.evaluate(Scheme::Gan, &[1])?;
    println!("{}\n{row}", envgan::metrics::SUMMARY_HEADER);
    println!("outputs under {}", out.display());
    Ok(())
}
