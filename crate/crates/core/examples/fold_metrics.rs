// Metrics for two hypothetical ten-fold runs and their difference matrix.

use envgan::metrics::{
    aggregate_folds, cohen_kappa, confusion_matrix, difference_matrix, heat_table, summary_row, ConfusionMatrix,
    FoldMetrics, SUMMARY_HEADER,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noisy_predictions(truth: &[usize], n_classes: usize, error_rate: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    truth
        .iter()
        .map(|&t| if rng.gen_bool(error_rate) { (t + rng.gen_range(1..n_classes)) % n_classes } else { t })
        .collect()
}

fn main() -> envgan::Result<()> {
    let names: Vec<String> = ["dog", "rain", "sea", "baby"].iter().map(|s| s.to_string()).collect();
    let k = names.len();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    println!("{SUMMARY_HEADER}");
    let mut totals = Vec::new();
    for (scheme, err) in [("baseline", 0.25), ("GAN", 0.15)] {
        let mut total = ConfusionMatrix::zeros(k);
        let mut folds = Vec::new();
        for _ in 0..10 {
            let truth: Vec<usize> = (0..40).map(|i| i % k).collect();
            let pred = noisy_predictions(&truth, k, err, &mut rng);
            let cm = confusion_matrix(&truth, &pred, k)?;
            total.add(&cm)?;
            folds.push(FoldMetrics::from_confusion(&cm)?);
        }
        println!("{}", summary_row(scheme, 10, &aggregate_folds(&folds)?));
        println!("  pooled kappa {:.3}", cohen_kappa(&total)?);
        totals.push(total);
    }
    println!("\nGAN minus baseline (row proportions):");
    print!("{}", heat_table(&names, &difference_matrix(&totals[1], &totals[0])?));
    Ok(())
}
