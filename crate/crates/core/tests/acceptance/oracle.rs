//! Reference implementations written independently of the library code.

use envgan::autodiff::{Graph, NodeId, Tensor};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Relative error with an absolute floor so near-zero gradients compare
/// on an absolute scale.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// Largest relative error between analytic gradients from the graph and
/// central differences of the forward value, over every input element.
pub fn max_fd_error<F>(inputs: &[Tensor<f64>], h: f64, f: F) -> Result<f64, String>
where
    F: Fn(&mut Graph<f64>, &[NodeId]) -> envgan::Result<NodeId>,
{
    let eval = |xs: &[Tensor<f64>]| -> Result<f64, String> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = xs.iter().map(|t| g.leaf(t.clone())).collect();
        let y = f(&mut g, &ids).map_err(|e| e.to_string())?;
        Ok(g.value(y).item())
    };
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let y = f(&mut g, &ids).map_err(|e| e.to_string())?;
    let grads = g.grad(y, &ids).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (k, x) in inputs.iter().enumerate() {
        let analytic: Vec<f64> = match grads[k] {
            Some(id) => g.value(id).data().to_vec(),
            None => vec![0.0; x.len()],
        };
        for i in 0..x.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
            worst = worst.max(rel_err(analytic[i], numeric));
        }
    }
    Ok(worst)
}

/// Dominant frequency of `x`, from a zero-padded FFT magnitude peak refined
/// by parabolic interpolation over the neighbouring bins.
pub fn peak_hz(x: &[f32], sr: f64) -> f64 {
    let n = (x.len() * 8).next_power_of_two().max(1 << 14);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&s| Complex::new(s as f64, 0.0)).collect();
    buf.resize(n, Complex::default());
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm()).collect();
    let k = (1..n / 2 - 1).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap_or(1);
    let (a, b, c) = (mag[k - 1].ln(), mag[k].ln(), mag[k + 1].ln());
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    (k as f64 + offset) * sr / n as f64
}

/// Metrics recomputed straight from the label lists.
pub struct BruteMetrics {
    pub counts: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub kappa: f64,
}

pub fn brute_metrics(y_true: &[usize], y_pred: &[usize], k: usize) -> BruteMetrics {
    let n = y_true.len() as f64;
    let mut counts = vec![vec![0u64; k]; k];
    for t in 0..k {
        for p in 0..k {
            counts[t][p] = y_true.iter().zip(y_pred).filter(|(&a, &b)| a == t && b == p).count() as u64;
        }
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count() as f64;
    let (mut ps, mut rs, mut fs) = (0.0, 0.0, 0.0);
    let mut chance = 0.0;
    for c in 0..k {
        let tp = y_true.iter().zip(y_pred).filter(|(&a, &b)| a == c && b == c).count() as f64;
        let fp = y_true.iter().zip(y_pred).filter(|(&a, &b)| a != c && b == c).count() as f64;
        let fnn = y_true.iter().zip(y_pred).filter(|(&a, &b)| a == c && b != c).count() as f64;
        ps += if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        rs += if tp + fnn > 0.0 { tp / (tp + fnn) } else { 0.0 };
        fs += if 2.0 * tp + fp + fnn > 0.0 { 2.0 * tp / (2.0 * tp + fp + fnn) } else { 0.0 };
        chance += ((tp + fnn) / n) * ((tp + fp) / n);
    }
    let observed = hits / n;
    let kappa = if chance >= 1.0 { 0.0 } else { (observed - chance) / (1.0 - chance) };
    BruteMetrics {
        counts,
        accuracy: observed,
        precision: ps / k as f64,
        recall: rs / k as f64,
        f1: fs / k as f64,
        kappa,
    }
}

/// Every regular file under `root`, as sorted relative paths.
pub fn list_files(root: &std::path::Path) -> Vec<std::path::PathBuf> {
    fn walk(dir: &std::path::Path, root: &std::path::Path, out: &mut Vec<std::path::PathBuf>) {
        let Ok(entries) = std::fs::read_dir(dir) else { return };
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
