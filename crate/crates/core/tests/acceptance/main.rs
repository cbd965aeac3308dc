//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits non-zero if any fail.
//!
//! cargo test --test acceptance              all criteria
//! cargo test --test acceptance -- 2 5 9     a subset, by number

mod oracle;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use envgan::audio::Waveform;
use envgan::augment::{mix_background, pitch_shift, time_stretch, SchemeKind};
use envgan::autodiff::{same_padding, Checkpoint, Graph, Mode, Module, Network, NodeId, Tensor};
use envgan::classifier::{train_classifier, ClfTrainConfig, CnnSpec};
use envgan::config::PipelineConfig;
use envgan::features::{select_patch, FeatureConfig, FeatureExtractor, LogMel};
use envgan::gan::{build_critic, build_generator, gradient_penalty_with_eps, train_gan, ArchConfig, GanTrainConfig};
use envgan::metrics::{cohen_kappa, confusion_matrix, scores, ConfusionMatrix, SUMMARY_HEADER};
use envgan::pipeline::{Pipeline, Scheme};
use envgan::simfilter::{filter_generated, similarity, similarity_samples, Decision, FilterConfig};
use envgan::synth::{mel_band_task, sine_burst, write_tone_dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: envgan::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- AC-01

/// Layer rows as printed in the reference architecture tables; `d` and `c`
/// are the width and channel symbols, `b` the batch.
const GENERATOR_ROWS: [(&str, &str, &str); 18] = [
    ("Input", "", "(b, 100)"),
    ("Dense_1", "(100, 3072d)", "(b, 3072d)"),
    ("Reshape_1", "", "(b, 16, 192d)"),
    ("ReLU_1", "", "(b, 16, 192d)"),
    ("Up_Conv_1", "(25, 192d, 96d)", "(b, 64, 96d)"),
    ("ReLU_2", "", "(b, 64, 96d)"),
    ("Up_Conv_2", "(25, 96d, 48d)", "(b, 256, 48d)"),
    ("ReLU_3", "", "(b, 256, 48d)"),
    ("Up_Conv_3", "(25, 48d, 24d)", "(b, 1024, 24d)"),
    ("ReLU_4", "", "(b, 1024, 24d)"),
    ("Up_Conv_4", "(25, 24d, 12d)", "(b, 4096, 12d)"),
    ("ReLU_5", "", "(b, 4096, 12d)"),
    ("Up_Conv_5", "(25, 12d, 6d)", "(b, 16384, 6d)"),
    ("ReLU_6", "", "(b, 16384, 6d)"),
    ("Up_Conv_6", "(25, 6d, 3d)", "(b, 65536, 3d)"),
    ("ReLU_7", "", "(b, 65536, 3d)"),
    ("Up_Conv_7", "(25, 3d, c)", "(b, 196608, c)"),
    ("Tanh", "", "(b, 196608, c)"),
];

const CRITIC_ROWS: [(&str, &str, &str); 24] = [
    ("Input", "", "(b, 196608, c)"),
    ("Conv_1", "(25, c, 3d)", "(b, 65536, 3d)"),
    ("Leaky_ReLU_1", "", "(b, 65536, 3d)"),
    ("Phase_Shuffle_1", "", "(b, 65536, 3d)"),
    ("Conv_2", "(25, 3d, 6d)", "(b, 16384, 6d)"),
    ("Leaky_ReLU_2", "", "(b, 16384, 6d)"),
    ("Phase_Shuffle_2", "", "(b, 16384, 6d)"),
    ("Conv_3", "(25, 6d, 12d)", "(b, 4096, 12d)"),
    ("Leaky_ReLU_3", "", "(b, 4096, 12d)"),
    ("Phase_Shuffle_3", "", "(b, 4096, 12d)"),
    ("Conv_4", "(25, 12d, 24d)", "(b, 1024, 24d)"),
    ("Leaky_ReLU_4", "", "(b, 1024, 24d)"),
    ("Phase_Shuffle_4", "", "(b, 1024, 24d)"),
    ("Conv_5", "(25, 24d, 48d)", "(b, 256, 48d)"),
    ("Leaky_ReLU_5", "", "(b, 256, 48d)"),
    ("Phase_Shuffle_5", "", "(b, 256, 48d)"),
    ("Conv_6", "(25, 48d, 96d)", "(b, 64, 96d)"),
    ("Leaky_ReLU_6", "", "(b, 64, 96d)"),
    ("Phase_Shuffle_6", "", "(b, 64, 96d)"),
    ("Conv_7", "(25, 96d, 192d)", "(b, 16, 192d)"),
    ("Leaky_ReLU_7", "", "(b, 16, 192d)"),
    ("Phase_Shuffle_7", "", "(b, 16, 192d)"),
    ("Reshape_1", "", "(b, 3072d)"),
    ("Dense_1", "(3072d, 1)", "(b, 1)"),
];

fn parse_shape(text: &str, b: usize, d: usize, c: usize) -> Vec<usize> {
    text.trim_matches(|ch| ch == '(' || ch == ')')
        .split(',')
        .map(|t| match t.trim() {
            "b" => b,
            "c" => c,
            t if t.ends_with('d') => t[..t.len() - 1].parse::<usize>().unwrap() * d,
            t => t.parse().unwrap(),
        })
        .collect()
}

fn check_rows(
    what: &str,
    net: &Network<f32>,
    input: Tensor<f32>,
    rows: &[(&str, &str, &str)],
    d: usize,
    c: usize,
) -> Result<(), String> {
    ensure(net.layers().len() + 1 == rows.len(), || {
        format!("{what}: {} rows, expected {}", net.layers().len() + 1, rows.len())
    })?;
    let mut g = Graph::new();
    ensure(input.shape() == parse_shape(rows[0].2, 1, d, c), || format!("{what}: input {:?}", input.shape()))?;
    let x = g.constant(input);
    let mut r = rng(3);
    let trace = lib(net.forward_traced(&mut g, x, &mut Mode::train(&mut r)))?;
    for ((layer, node), (name, kernel, out)) in net.layers().iter().zip(&trace).zip(&rows[1..]) {
        // singleton rows such as `Tanh` carry no index in the table
        let same = layer.name == *name || layer.name == format!("{name}_1");
        ensure(same, || format!("{what}: layer {} where {name} expected", layer.name))?;
        let want = parse_shape(out, 1, d, c);
        ensure(g.shape(*node) == want, || format!("{what} {name}: output {:?}, expected {want:?}", g.shape(*node)))?;
        if !kernel.is_empty() {
            let want = parse_shape(kernel, 1, d, c);
            let id = layer.weight.ok_or_else(|| format!("{what} {name}: no weight"))?;
            let got = net.params().value(id).shape();
            ensure(got == want, || format!("{what} {name}: kernel {got:?}, expected {want:?}"))?;
        }
    }
    Ok(())
}

fn ac01_shapes() -> Outcome {
    let (d, c) = (2, 1);
    ensure(ArchConfig::paper().d == 64, || "default width is not 64".into())?;
    let arch = ArchConfig::paper_with_d(d);
    let mut r = rng(1);
    let gen = lib(build_generator::<f32, _>(&arch, &mut r))?;
    let critic = lib(build_critic::<f32, _>(&arch, &mut r))?;
    let z = Tensor::from_fn(&[1, 100], |_| r.gen_range(-1.0f32..=1.0));
    check_rows("generator", &gen, z, &GENERATOR_ROWS, d, c)?;
    let x = Tensor::from_fn(&[1, 196_608, 1], |_| r.gen_range(-1.0f32..=1.0));
    check_rows("critic", &critic, x, &CRITIC_ROWS, d, c)?;
    Ok("generator 18 rows and critic 24 rows match at d=2, b=1".into())
}

// ---------------------------------------------------------------- AC-02

type Builder = Box<dyn Fn(&mut Graph<f64>, &[NodeId]) -> envgan::Result<NodeId>>;

fn uniform(r: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| r.gen_range(-1.0..1.0))
}

/// Values bounded away from zero, for the piecewise-linear activations.
fn off_zero(r: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = r.gen_range(0.05..1.0);
        if r.gen::<bool>() {
            m
        } else {
            -m
        }
    })
}

/// Reduce any output to a scalar with fixed random weights.
fn weighted_sum(g: &mut Graph<f64>, y: NodeId, seed: u64) -> envgan::Result<NodeId> {
    let shape = g.shape(y).to_vec();
    let mut r = rng(seed);
    let w = g.constant(uniform(&mut r, &shape));
    let p = g.mul(y, w)?;
    Ok(g.sum_all(p))
}

fn gradient_case(kind: &str, r: &mut ChaCha8Rng) -> (Vec<Tensor<f64>>, Builder) {
    let seed: u64 = r.gen();
    match kind {
        "dense" => {
            let (b, i, o) = (r.gen_range(1..4), r.gen_range(1..7), r.gen_range(1..7));
            let inputs = vec![uniform(r, &[b, i]), uniform(r, &[i, o]), uniform(r, &[o])];
            (
                inputs,
                Box::new(move |g, x| {
                    let y = g.matmul(x[0], x[1])?;
                    let bias = g.broadcast_to(x[2], &[b, o])?;
                    let y = g.add(y, bias)?;
                    weighted_sum(g, y, seed)
                }),
            )
        }
        "conv1d" => {
            let (b, l, ci, co) = (r.gen_range(1..3), r.gen_range(4..13), r.gen_range(1..4), r.gen_range(1..4));
            let (k, s) = (r.gen_range(1..6), r.gen_range(1..4));
            let pad = same_padding(l, k, s);
            let inputs = vec![uniform(r, &[b, l, ci]), uniform(r, &[k, ci, co])];
            (
                inputs,
                Box::new(move |g, x| {
                    let y = g.conv1d(x[0], x[1], s, pad)?;
                    weighted_sum(g, y, seed)
                }),
            )
        }
        "tconv1d" => {
            let (b, l, ci, co) = (r.gen_range(1..3), r.gen_range(2..7), r.gen_range(1..4), r.gen_range(1..4));
            let (k, s) = (r.gen_range(1..8), r.gen_range(1..5));
            let inputs = vec![uniform(r, &[b, l, ci]), uniform(r, &[k, ci, co])];
            (
                inputs,
                Box::new(move |g, x| {
                    let y = g.tconv1d(x[0], x[1], s)?;
                    weighted_sum(g, y, seed)
                }),
            )
        }
        "conv2d" => {
            let (b, h, w) = (r.gen_range(1..3), r.gen_range(2..7), r.gen_range(2..7));
            let (ci, co) = (r.gen_range(1..3), r.gen_range(1..4));
            let (kh, kw) = (2 * r.gen_range(0..3) + 1, 2 * r.gen_range(0..3) + 1);
            let inputs = vec![uniform(r, &[b, h, w, ci]), uniform(r, &[kh, kw, ci, co])];
            (
                inputs,
                Box::new(move |g, x| {
                    let y = g.conv2d_same(x[0], x[1])?;
                    weighted_sum(g, y, seed)
                }),
            )
        }
        "maxpool2d" => {
            let (ph, pw) = (r.gen_range(1..4), r.gen_range(1..4));
            let (b, h, w, c) = (r.gen_range(1..3), ph * r.gen_range(1..4), pw * r.gen_range(1..4), r.gen_range(1..3));
            // distinct values at least 0.01 apart, so no window has a near tie
            let n = b * h * w * c;
            let mut vals: Vec<f64> = (0..n).map(|i| i as f64 * 0.01 - 0.5).collect();
            rand::seq::SliceRandom::shuffle(&mut vals[..], r);
            let inputs = vec![Tensor::new(vec![b, h, w, c], vals).unwrap()];
            (
                inputs,
                Box::new(move |g, x| {
                    let y = g.maxpool2d(x[0], ph, pw)?;
                    weighted_sum(g, y, seed)
                }),
            )
        }
        "relu" | "leaky_relu" | "tanh" => {
            let shape = [r.gen_range(1..4), r.gen_range(1..9)];
            let slope = r.gen_range(0.01..0.5);
            let kind = kind.to_string();
            let inputs = vec![off_zero(r, &shape)];
            (
                inputs,
                Box::new(move |g, x| {
                    let y = match kind.as_str() {
                        "relu" => g.relu(x[0]),
                        "leaky_relu" => g.leaky_relu(x[0], slope),
                        _ => g.tanh(x[0]),
                    };
                    weighted_sum(g, y, seed)
                }),
            )
        }
        "softmax+ce" => {
            let (b, k) = (r.gen_range(1..6), r.gen_range(2..7));
            let labels: Vec<usize> = (0..b).map(|_| r.gen_range(0..k)).collect();
            let logits = Tensor::from_fn(&[b, k], |_| r.gen_range(-3.0..3.0));
            (vec![logits], Box::new(move |g, x| g.softmax_cross_entropy(x[0], &labels)))
        }
        "phase_shuffle" => {
            let (b, l, c) = (r.gen_range(1..4), r.gen_range(3..10), r.gen_range(1..3));
            let n = r.gen_range(1..3).min(l - 1) as isize;
            let shifts: Vec<isize> = (0..b).map(|_| r.gen_range(-n..=n)).collect();
            let inputs = vec![uniform(r, &[b, l, c])];
            (
                inputs,
                Box::new(move |g, x| {
                    let y = g.phase_shuffle_with_shifts(x[0], &shifts)?;
                    weighted_sum(g, y, seed)
                }),
            )
        }
        "dropout" => {
            let shape = [r.gen_range(1..4), r.gen_range(1..9)];
            let rate = r.gen_range(0.1..0.7);
            let mask = Tensor::from_fn(&shape, |_| if r.gen::<f64>() < rate { 0.0 } else { 1.0 / (1.0 - rate) });
            let inputs = vec![uniform(r, &shape)];
            (
                inputs,
                Box::new(move |g, x| {
                    let y = g.dropout_with_mask(x[0], mask.clone())?;
                    weighted_sum(g, y, seed)
                }),
            )
        }
        _ => unreachable!("unknown layer kind {kind}"),
    }
}

const GRADIENT_KINDS: [&str; 11] = [
    "dense",
    "conv1d",
    "tconv1d",
    "conv2d",
    "maxpool2d",
    "relu",
    "leaky_relu",
    "tanh",
    "softmax+ce",
    "phase_shuffle",
    "dropout",
];

fn ac02_gradients() -> Outcome {
    let mut r = rng(2);
    let mut worst = (0.0f64, "");
    for kind in GRADIENT_KINDS {
        for instance in 0..20 {
            let (inputs, f) = gradient_case(kind, &mut r);
            let err = oracle::max_fd_error(&inputs, 1e-5, f).map_err(|e| format!("{kind} #{instance}: {e}"))?;
            ensure(err < 1e-4, || format!("{kind} #{instance}: max relative error {err:.3e}"))?;
            if err > worst.0 {
                worst = (err, kind);
            }
        }
    }
    Ok(format!("11 kinds x 20 instances, worst {:.2e} ({})", worst.0, worst.1))
}

// ---------------------------------------------------------------- AC-03

/// `x ↦ Σ_i u_i x_i` per sample.
struct Linear(Vec<f64>);

impl Module<f64> for Linear {
    fn forward(&self, g: &mut Graph<f64>, x: NodeId, _: &mut Mode<'_>) -> envgan::Result<NodeId> {
        let b = g.shape(x)[0];
        let n = self.0.len();
        let flat = g.reshape(x, &[b, n])?;
        let u = g.constant(Tensor::new(vec![n, 1], self.0.clone())?);
        g.matmul(flat, u)
    }
}

/// Output independent of the input.
struct Constant;

impl Module<f64> for Constant {
    fn forward(&self, g: &mut Graph<f64>, x: NodeId, _: &mut Mode<'_>) -> envgan::Result<NodeId> {
        let b = g.shape(x)[0];
        Ok(g.constant(Tensor::full(&[b, 1], 0.7)))
    }
}

/// `0·Σx + c`: depends on the input in the graph but has zero gradient.
struct Flat;

impl Module<f64> for Flat {
    fn forward(&self, g: &mut Graph<f64>, x: NodeId, _: &mut Mode<'_>) -> envgan::Result<NodeId> {
        let b = g.shape(x)[0];
        let n = g.value(x).len() / b;
        let flat = g.reshape(x, &[b, n])?;
        let s = g.sum_last(flat)?;
        let z = g.scale(s, 0.0);
        Ok(g.add_scalar(z, 1.5))
    }
}

fn penalty(critic: &dyn Module<f64>, b: usize, n: usize, seed: u64) -> Result<f64, String> {
    let mut r = rng(seed);
    let real = uniform(&mut r, &[b, n]);
    let fake = uniform(&mut r, &[b, n]);
    let eps: Vec<f64> = (0..b).map(|_| r.gen()).collect();
    let mut g = Graph::new();
    let p = lib(gradient_penalty_with_eps(&mut g, critic, &real, &fake, &eps, &mut Mode::train(&mut r)))?;
    Ok(g.value(p).item())
}

fn ac03_penalty() -> Outcome {
    let mut r = rng(31);
    for trial in 0..10 {
        let n = r.gen_range(1..12);
        let raw: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let unit = Linear(raw.iter().map(|v| v / norm).collect());
        let p = penalty(&unit, r.gen_range(1..5), n, trial)?;
        ensure(p.abs() <= 1e-10, || format!("unit-slope critic: penalty {p:e}"))?;
    }
    for critic in [&Constant as &dyn Module<f64>, &Flat] {
        let p = penalty(critic, 3, 5, 7)?;
        ensure((p - 1.0).abs() <= 1e-10, || format!("constant critic: penalty {p}"))?;
    }
    let p = penalty(&Linear(vec![3.0; 4]), 2, 4, 9)?;
    ensure((p - 25.0).abs() <= 1e-8, || format!("3*sum(x) critic: penalty {p}"))?;
    Ok(format!("unit slope 0, constant 1, 3*sum(x) {p}"))
}

// ---------------------------------------------------------------- AC-04

fn ac04_gan() -> Outcome {
    let cfg = PipelineConfig::desk();
    let arch = cfg.arch.clone();
    ensure(arch.output_len() == 768, || format!("desk output length {}", arch.output_len()))?;
    let sr = arch.sample_rate_hz;
    let mut notes = Vec::new();
    for (class, freq) in [(0u64, 1500.0), (1, 4500.0)] {
        let mut r = rng(40 + class);
        let clips = lib((0..64).map(|_| sine_burst(freq, 768, sr, &mut r)).collect::<envgan::Result<Vec<_>>>())?;
        let train_cfg = GanTrainConfig { epochs: 200, ..cfg.gan.clone() };
        let trained = lib(train_gan(&clips, &arch, &train_cfg))?;
        let w: Vec<f64> = trained.log.iter().map(|e| e.wasserstein).collect();
        let first = w[..10].iter().sum::<f64>() / 10.0;
        let last = w[w.len() - 10..].iter().sum::<f64>() / 10.0;
        let ratio = last.abs() / first.abs();
        ensure(ratio <= 0.5, || format!("{freq} Hz: |W| {first:.4} -> {last:.4} (ratio {ratio:.3})"))?;
        let generated = lib(trained.gan.generate(50, &mut r))?;
        let near = generated
            .iter()
            .filter(|g| (oracle::peak_hz(g.samples(), sr as f64) / freq - 1.0).abs() <= 0.1)
            .count();
        ensure(near * 10 >= 6 * generated.len(), || {
            format!("{freq} Hz: {near}/{} generated peaks within 10%", generated.len())
        })?;
        notes.push(format!("{freq} Hz: |W| ratio {ratio:.3}, {near}/50 on pitch"));
    }
    Ok(notes.join("; "))
}

// ---------------------------------------------------------------- AC-05

fn ac05_similarity() -> Outcome {
    let mut r = rng(5);
    for _ in 0..50 {
        let a: Vec<f32> = (0..r.gen_range(1..300)).map(|_| r.gen_range(-1.0..1.0)).collect();
        let b: Vec<f32> = (0..r.gen_range(1..300)).map(|_| r.gen_range(-1.0..1.0)).collect();
        let self_score = lib(similarity_samples(&a, &a, 1e-4))?.value;
        ensure(self_score == 0.0, || format!("S(a,a) = {self_score:e}"))?;
        let (ab, ba) = (lib(similarity_samples(&a, &b, 1e-4))?.value, lib(similarity_samples(&b, &a, 1e-4))?.value);
        ensure(ab == ba, || format!("S(a,b) = {ab} but S(b,a) = {ba}"))?;
    }
    let s = lib(similarity_samples(&[1.0, 2.0], &[2.0, 1.0], 1e-4))?.value;
    ensure((s - 1.0).abs() <= 1e-12, || format!("hand example gives {s}"))?;

    let refs = lib((0..5).map(|_| sine_burst(r.gen_range(300.0..3000.0), 2048, 44_100, &mut r)).collect::<envgan::Result<Vec<_>>>())?;
    let fresh = lib(sine_burst(777.0, 2048, 44_100, &mut r))?;
    let generated = vec![refs[2].clone(), fresh];
    let out = lib(filter_generated(&generated, &refs, &FilterConfig { threshold: 0.1, ..FilterConfig::default() }))?;
    ensure(out.records[0].decision == Decision::Rejected, || "verbatim copy was accepted".into())?;
    ensure(out.records[0].score == 0.0 && out.records[0].best_reference == 2, || format!("{:?}", out.records[0]))?;
    ensure(out.records[1].decision == Decision::Accepted, || format!("distinct clip rejected: {:?}", out.records[1]))?;
    let via_waveforms = lib(similarity(&refs[0], &refs[1], 1e-4))?.value;
    ensure(via_waveforms > 0.1, || format!("distinct references score {via_waveforms}"))?;
    Ok(format!("S([1,2],[2,1]) = {s}, copy rejected"))
}

// ---------------------------------------------------------------- AC-06

fn tone(freq: f64, len: usize, sr: u32) -> Waveform {
    let x = (0..len).map(|n| (0.5 * (2.0 * std::f64::consts::PI * freq * n as f64 / sr as f64).sin()) as f32).collect();
    Waveform::new(x, sr).unwrap()
}

fn ac06_dsp() -> Outcome {
    let sr = 44_100;
    let a = tone(440.0, sr as usize, sr);
    let up = lib(pitch_shift(&a, 12.0))?;
    let f_up = oracle::peak_hz(up.samples(), sr as f64);
    ensure((f_up / 880.0 - 1.0).abs() <= 0.01, || format!("+12 semitones: peak {f_up:.2} Hz"))?;
    ensure(up.len() == a.len(), || format!("pitch shift changed length to {}", up.len()))?;

    let st = lib(time_stretch(&a, 1.05))?;
    ensure(st.len().abs_diff(42_000) <= 2048, || format!("stretched length {}", st.len()))?;
    let f_st = oracle::peak_hz(st.samples(), sr as f64);
    ensure((f_st / 440.0 - 1.0).abs() <= 0.01, || format!("stretched tone peak {f_st:.2} Hz"))?;

    let mut r = rng(6);
    let noise = Waveform::new((0..10_000).map(|_| r.gen_range(-1.0..1.0)).collect(), sr).unwrap();
    let mixed = lib(mix_background(&a, &noise, 0.0))?;
    ensure(mixed == a, || "mix_background with w = 0 altered the clip".into())?;
    Ok(format!("+12 st -> {f_up:.1} Hz; stretch 1.05 -> {} samples at {f_st:.1} Hz", st.len()))
}

// ---------------------------------------------------------------- AC-07

fn ac07_features() -> Outcome {
    let fx = lib(FeatureExtractor::new(FeatureConfig::default()))?;
    let mut r = rng(7);
    let noise = Waveform::new((0..176_400).map(|_| r.gen_range(-0.5..0.5)).collect(), 44_100).unwrap();
    let lm = lib(fx.log_mel(&noise))?;
    ensure(lm.n_frames == 172 && lm.n_mels == 128, || format!("4 s clip: {} x {}", lm.n_frames, lm.n_mels))?;

    for _ in 0..30 {
        let frames = r.gen_range(1..400);
        let m = LogMel {
            values: (0..frames * 128).map(|_| r.gen_range(-14.0..2.0)).collect(),
            n_frames: frames,
            n_mels: 128,
        };
        let p = lib(select_patch(&m, 128, &mut r))?;
        ensure(p.shape() == [128, 128, 1] && p.values.len() == 128 * 128, || {
            format!("{frames} frames gave patch {:?}", p.shape())
        })?;
    }

    let silent = lib(fx.log_mel(&Waveform::silence(176_400, 44_100).unwrap()))?;
    let patch = lib(select_patch(&silent, 128, &mut r))?;
    let floor = (1e-6f64).ln() as f32;
    ensure(patch.values.iter().all(|&v| v == floor), || "silent patch is not constant ln(1e-6)".into())?;
    Ok(format!("172 frames, 128x128x1 patches, silence = {floor}"))
}

// ---------------------------------------------------------------- AC-08

fn ac08_classifier() -> Outcome {
    let start = Instant::now();
    let cfg = PipelineConfig::desk();
    let mut r = rng(8);
    let (patches, labels) = mel_band_task(3, 100, 128, 128, &mut r);
    let refs: Vec<_> = patches.iter().collect();
    let (train, test) = refs.split_at(240);
    let spec = CnnSpec::with_classes(3);
    let trained = lib(train_classifier(train, &labels[..240], &spec, &cfg.clf))?;
    ensure(cfg.clf.epochs <= 20, || format!("desk profile trains {} epochs", cfg.clf.epochs))?;
    let train_acc = lib(scores(&lib(confusion_matrix(&labels[..240], &lib(trained.model.predict_labels(train))?, 3))?))?.accuracy;
    let test_acc = lib(scores(&lib(confusion_matrix(&labels[240..], &lib(trained.model.predict_labels(test))?, 3))?))?.accuracy;
    let elapsed = start.elapsed();
    ensure(train_acc >= 0.95, || format!("training accuracy {train_acc:.3}"))?;
    ensure(test_acc >= 0.90, || format!("held-out accuracy {test_acc:.3}"))?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {:.0} s", elapsed.as_secs_f64()))?;
    Ok(format!("train {train_acc:.3}, held-out {test_acc:.3} after {} epochs", cfg.clf.epochs))
}

// ---------------------------------------------------------------- AC-09

fn ac09_metrics() -> Outcome {
    let mut r = rng(9);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    for trial in 0..1000 {
        let k = r.gen_range(1..=10);
        let n = r.gen_range(1..=200);
        let y_true: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
        // mostly-correct predictions so kappa covers a useful range
        let skill = r.gen::<f64>();
        let y_pred: Vec<usize> = y_true.iter().map(|&t| if r.gen::<f64>() < skill { t } else { r.gen_range(0..k) }).collect();
        let want = oracle::brute_metrics(&y_true, &y_pred, k);
        let cm = lib(confusion_matrix(&y_true, &y_pred, k))?;
        ensure(cm.rows() == want.counts, || format!("trial {trial}: confusion matrix differs"))?;
        let s = lib(scores(&cm))?;
        let kappa = lib(cohen_kappa(&cm))?;
        for (name, got, exp) in [
            ("accuracy", s.accuracy, want.accuracy),
            ("precision", s.precision, want.precision),
            ("recall", s.recall, want.recall),
            ("f1", s.f1, want.f1),
            ("kappa", kappa, want.kappa),
        ] {
            ensure(close(got, exp), || format!("trial {trial}: {name} {got} vs {exp}"))?;
        }
    }
    let hand = lib(ConfusionMatrix::from_rows(&[vec![4, 1], vec![2, 3]]))?;
    let kappa = lib(cohen_kappa(&hand))?;
    ensure(close(kappa, 0.4), || format!("kappa([[4,1],[2,3]]) = {kappa}"))?;
    let acc = lib(scores(&hand))?.accuracy;
    ensure(acc == 0.7, || format!("accuracy([[4,1],[2,3]]) = {acc}"))?;
    Ok(format!("1000 instances agree; hand kappa {kappa}"))
}

// ---------------------------------------------------------------- AC-10

fn mini_pipeline(out: &Path, data: &Path, csv: &Path) -> envgan::Result<()> {
    let mut cfg = PipelineConfig::desk();
    cfg.gan.epochs = 3;
    cfg.clf.epochs = 1;
    let p = Pipeline::new(cfg, out);
    p.ingest(data, csv)?;
    p.augment(SchemeKind::PitchShift1)?;
    for class in ["low", "high"] {
        p.gan_train(class)?;
        p.gan_generate(class, 10)?;
        p.gan_filter(class)?;
    }
    for scheme in [Scheme::Baseline, Scheme::Gan] {
        p.clf_train(scheme, &[1])?;
        p.evaluate(scheme, &[1])?;
    }
    p.report()?;
    Ok(())
}

fn ac10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let csv = lib(write_tone_dataset(&data, &[("low", 600.0), ("high", 2500.0)], 10, 4096, 44_100, &mut rng(10)))?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    lib(mini_pipeline(&a, &data, &csv))?;
    lib(mini_pipeline(&b, &data, &csv))?;
    let files = oracle::list_files(&a);
    ensure(files == oracle::list_files(&b), || "runs wrote different file sets".into())?;
    let mut compared = 0;
    for f in &files {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        ensure(x == y, || format!("{} differs between runs", f.display()))?;
        compared += 1;
    }
    for dir in ["checkpoints", "reports"] {
        ensure(files.iter().any(|f| f.starts_with(dir)), || format!("no files under {dir}/"))?;
    }

    let mut round_trips = 0;
    for f in files.iter().filter(|f| f.extension().is_some_and(|e| e == "egan")) {
        let path = a.join(f);
        let original = std::fs::read(&path).unwrap();
        let ck = lib(Checkpoint::load(&path))?;
        let copy = tmp.path().join("copy.egan");
        lib(ck.save(&copy))?;
        ensure(std::fs::read(&copy).unwrap() == original, || format!("{} changed on rewrite", f.display()))?;
        round_trips += 1;
    }
    ensure(round_trips >= 3, || format!("only {round_trips} checkpoints found"))?;

    let spec = CnnSpec::with_classes(2);
    let (patches, labels) = mel_band_task(2, 8, 128, 128, &mut rng(11));
    let refs: Vec<_> = patches.iter().collect();
    let clf = ClfTrainConfig { epochs: 1, batch_size: 8, ..ClfTrainConfig::default() };
    let one = lib(lib(train_classifier(&refs, &labels, &spec, &clf))?.model.to_checkpoint().to_bytes())?;
    let two = lib(lib(train_classifier(&refs, &labels, &spec, &clf))?.model.to_checkpoint().to_bytes())?;
    ensure(one == two, || "classifier checkpoints differ between runs".into())?;
    Ok(format!("{compared} files identical across runs, {round_trips} checkpoints rewrite bit-identically"))
}

// ---------------------------------------------------------------- AC-11

fn cli(out: &Path, args: &[&str]) -> Result<String, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_envgan"));
    cmd.args(["--config", "desk", "--out"]).arg(out).args(args);
    let res = cmd.output().map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&res.stdout).into_owned();
    ensure(res.status.success(), || {
        format!("`envgan {}` exited {:?}: {}", args.join(" "), res.status.code(), String::from_utf8_lossy(&res.stderr).trim())
    })?;
    Ok(stdout)
}

fn count_files(dir: &Path) -> usize {
    oracle::list_files(dir).iter().filter(|f| f.extension().is_some_and(|e| e == "wav")).count()
}

fn ac11_cli() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    let classes = [("hum", 700.0), ("chirp", 3000.0)];
    let csv = lib(write_tone_dataset(&data, &classes, 20, 8192, 44_100, &mut rng(12)))?;
    let mut scene_args = Vec::new();
    for i in 1..=4 {
        let path = tmp.path().join(format!("scene{i}.wav"));
        let mut r = rng(100 + i);
        let w = Waveform::new((0..22_050).map(|_| r.gen_range(-0.3..0.3)).collect(), 22_050).unwrap();
        lib(envgan::audio::write_wav(&w, &path))?;
        scene_args.push(format!("background.scene_{i}={}", path.display()));
    }
    let (d, c) = (data.display().to_string(), csv.display().to_string());
    cli(&out, &["ingest", "--data", &d, "--manifest", &c])?;
    for scheme in ["time_stretch", "pitch_shift1", "pitch_shift2", "drcomp", "background"] {
        let mut args = vec!["augment", "--scheme", scheme];
        for s in &scene_args {
            args.extend(["--set", s]);
        }
        cli(&out, &args)?;
        let n = count_files(&out.join("augmented").join(scheme));
        ensure(n == 4 * 40, || format!("{scheme}: {n} augmented clips, expected 160"))?;
    }
    cli(&out, &["gan-train", "--set", "gan.epochs=20"])?;
    cli(&out, &["gan-generate", "--count", "50"])?;
    for (class, _) in classes {
        let n = count_files(&out.join("generated").join(class));
        ensure(n == 50, || format!("{class}: {n} generated clips"))?;
    }
    cli(&out, &["gan-filter"])?;
    for (class, _) in classes {
        let manifest = out.join("filtered").join(class).join("filter_manifest.csv");
        ensure(manifest.exists(), || format!("missing {}", manifest.display()))?;
    }
    cli(&out, &["clf-train", "--scheme", "GAN", "--folds", "1"])?;
    let stdout = cli(&out, &["evaluate", "--scheme", "GAN", "--folds", "1"])?;

    let summary = std::fs::read_to_string(out.join("reports").join("GAN").join("summary.csv")).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = summary.lines().collect();
    ensure(lines.len() == 2 && lines[0] == SUMMARY_HEADER, || format!("summary.csv:\n{summary}"))?;
    ensure(stdout.contains(lines[1]), || "evaluate did not print the summary row".into())?;
    let fields: Vec<&str> = lines[1].split(',').collect();
    let header: Vec<&str> = SUMMARY_HEADER.split(',').collect();
    ensure(fields.len() == header.len() && fields[0] == "GAN" && fields[1] == "1", || format!("row {:?}", lines[1]))?;
    for (name, v) in header[2..].iter().zip(&fields[2..]) {
        let v: f64 = v.parse().map_err(|_| format!("{name} = {v:?} is not a number"))?;
        ensure(v.is_finite() && (-1.0..=1.0).contains(&v), || format!("{name} = {v}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(900), || format!("took {:.0} s", elapsed.as_secs_f64()))?;
    Ok(format!("row: {}", lines[1]))
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("shape conformance", ac01_shapes),
        ("gradient correctness", ac02_gradients),
        ("gradient penalty analytics", ac03_penalty),
        ("desk GAN training", ac04_gan),
        ("similarity filter", ac05_similarity),
        ("DSP oracles", ac06_dsp),
        ("feature pipeline", ac07_features),
        ("classifier sanity", ac08_classifier),
        ("metrics oracle", ac09_metrics),
        ("determinism and round trip", ac10_determinism),
        ("end-to-end CLI run", ac11_cli),
    ];
    let limits = [60, 120, 60, 900, 60, 60, 60, 300, 60, 600, 900];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        let result = result.and_then(|msg| {
            if secs > limits[i] as f64 {
                Err(format!("{msg}; exceeded {} s", limits[i]))
            } else {
                Ok(msg)
            }
        });
        match result {
            Ok(msg) => println!("[PASS] AC-{id:02} {name} ({secs:.1} s): {msg}"),
            Err(msg) => {
                failures += 1;
                println!("[FAIL] AC-{id:02} {name} ({secs:.1} s): {msg}");
            }
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
