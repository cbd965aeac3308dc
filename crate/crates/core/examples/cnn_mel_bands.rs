// Train the log-mel CNN on a three-class synthetic task (noise in distinct
// mel regions) and report held-out accuracy.
//
// cargo run --release --example cnn_mel_bands [-- epochs]

use envgan::classifier::{train_classifier_with, ClfTrainConfig, CnnSpec};
use envgan::metrics::{confusion_matrix, scores};
use envgan::synth::mel_band_task;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> envgan::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (patches, labels) = mel_band_task(3, 100, 128, 128, &mut rng);
    let refs: Vec<_> = patches.iter().collect();
    let (train, test) = refs.split_at(240);

    let cfg = ClfTrainConfig { batch_size: 32, epochs, ..ClfTrainConfig::default() };
    let trained = train_classifier_with(train, &labels[..240], &CnnSpec::with_classes(3), &cfg, |e| {
        println!("epoch {:2}: loss {:.4}, accuracy {:.3}", e.epoch, e.loss, e.accuracy)
    })?;

    let pred = trained.model.predict_labels(test)?;
    let cm = confusion_matrix(&labels[240..], &pred, 3)?;
    let s = scores(&cm)?;
    println!("held-out accuracy {:.3}, macro F1 {:.3}", s.accuracy, s.f1);
    print!("{}", cm.to_csv(&["low".into(), "mid".into(), "high".into()]));
    Ok(())
}
