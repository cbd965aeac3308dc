//! Log-mel patch CNN classifier, its training loop and fold-wise
//! cross-validation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{softmax_rows, Adam, AdamConfig, Checkpoint, Graph, LayerSpec, Mode, Module, Network, Tensor};
use crate::dataset::Origin;
use crate::error::{Error, Result};
use crate::features::LogMelPatch;
use crate::metrics::{confusion_matrix, ConfusionMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct CnnSpec {
    pub input: (usize, usize),
    pub conv_widths: [usize; 3],
    pub kernel: (usize, usize),
    pub pool: (usize, usize),
    pub dense_units: usize,
    pub dropout: f64,
    pub n_classes: usize,
    /// Max-norm bound on the hidden dense layer's incoming weights.
    pub max_norm: Option<f64>,
}

impl Default for CnnSpec {
    fn default() -> Self {
        Self {
            input: (128, 128),
            conv_widths: [24, 48, 48],
            kernel: (5, 5),
            pool: (4, 2),
            dense_units: 64,
            dropout: 0.5,
            n_classes: 10,
            max_norm: Some(3.0),
        }
    }
}

impl CnnSpec {
    pub fn with_classes(n_classes: usize) -> Self {
        Self { n_classes, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let (ph, pw) = self.pool;
        let ok = self.n_classes >= 2
            && self.conv_widths.iter().all(|&c| c > 0)
            && self.kernel.0 % 2 == 1
            && self.kernel.1 % 2 == 1
            && ph > 0
            && pw > 0
            && self.input.0 % (ph * ph) == 0
            && self.input.1 % (pw * pw) == 0
            && self.dense_units > 0
            && (0.0..1.0).contains(&self.dropout)
            && self.max_norm.is_none_or(|c| c > 0.0);
        if !ok {
            return Err(Error::Config(format!("invalid CNN spec {self:?}")));
        }
        Ok(())
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let [c1, c2, c3] = self.conv_widths;
        let flat = (self.input.0 / (self.pool.0 * self.pool.0)) * (self.input.1 / (self.pool.1 * self.pool.1)) * c3;
        vec![
            LayerSpec::Conv2d { filters: c1, kernel: self.kernel },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d { pool: self.pool },
            LayerSpec::Conv2d { filters: c2, kernel: self.kernel },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d { pool: self.pool },
            LayerSpec::Conv2d { filters: c3, kernel: self.kernel },
            LayerSpec::Relu,
            LayerSpec::Reshape { shape: vec![flat] },
            LayerSpec::Dropout { rate: self.dropout },
            LayerSpec::Dense { units: self.dense_units, max_norm: self.max_norm },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: self.dropout },
            LayerSpec::Dense { units: self.n_classes, max_norm: None },
        ]
    }

    fn to_tensor(&self) -> Tensor<f32> {
        let v = vec![
            self.input.0 as f32,
            self.input.1 as f32,
            self.conv_widths[0] as f32,
            self.conv_widths[1] as f32,
            self.conv_widths[2] as f32,
            self.kernel.0 as f32,
            self.kernel.1 as f32,
            self.pool.0 as f32,
            self.pool.1 as f32,
            self.dense_units as f32,
            (self.dropout * 1e6).round() as f32,
            self.n_classes as f32,
            self.max_norm.map_or(-1.0, |c| (c * 1e3).round() as f32),
        ];
        Tensor::new(vec![v.len()], v).expect("shape matches")
    }

    fn from_tensor(t: &Tensor<f32>) -> Result<Self> {
        let v = t.data();
        if v.len() != 13 {
            return Err(Error::Checkpoint("malformed classifier metadata".into()));
        }
        let u = |i: usize| v[i] as usize;
        let spec = Self {
            input: (u(0), u(1)),
            conv_widths: [u(2), u(3), u(4)],
            kernel: (u(5), u(6)),
            pool: (u(7), u(8)),
            dense_units: u(9),
            dropout: v[10] as f64 / 1e6,
            n_classes: u(11),
            max_norm: (v[12] >= 0.0).then(|| v[12] as f64 / 1e3),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClfTrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Samples per forward pass inside a batch; gradients are accumulated
    /// across chunks, so this only bounds memory.
    pub chunk: usize,
}

impl Default for ClfTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs: 150,
            adam: AdamConfig {
                alpha: 1e-3,
                beta1: 0.9,
                beta2: 0.999,
                epsilon: 1e-7,
            },
            seed: 0,
            chunk: 16,
        }
    }
}

impl ClfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.chunk == 0 {
            return Err(Error::Config("batch size, epochs and chunk must be positive".into()));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone)]
pub struct Classifier {
    pub spec: CnnSpec,
    pub net: Network<f32>,
}

pub fn build_cnn(spec: &CnnSpec, rng: &mut impl Rng) -> Result<Classifier> {
    spec.validate()?;
    let net = Network::build(&[spec.input.0, spec.input.1, 1], spec.layer_specs(), rng)?;
    Ok(Classifier { spec: spec.clone(), net })
}

impl Classifier {
    fn check(&self, p: &LogMelPatch) -> Result<()> {
        if (p.frames, p.mels) != self.spec.input || p.values.len() != p.frames * p.mels {
            return Err(Error::Dimension(format!(
                "classifier expects {}×{}×1 patches, got {}×{}×1",
                self.spec.input.0, self.spec.input.1, p.frames, p.mels
            )));
        }
        Ok(())
    }

    fn batch_tensor(&self, patches: &[&LogMelPatch]) -> Result<Tensor<f32>> {
        let mut data = Vec::with_capacity(patches.len() * self.spec.input.0 * self.spec.input.1);
        for p in patches {
            self.check(p)?;
            data.extend_from_slice(&p.values);
        }
        Tensor::new(vec![patches.len(), self.spec.input.0, self.spec.input.1, 1], data)
    }

    /// Class probabilities for each patch, in inference mode.
    pub fn predict_batch(&self, patches: &[&LogMelPatch]) -> Result<Vec<Vec<f32>>> {
        let mut out = Vec::with_capacity(patches.len());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for chunk in patches.chunks(16) {
            let mut g = Graph::new();
            let x = g.constant(self.batch_tensor(chunk)?);
            let logits = self.net.forward(&mut g, x, &mut Mode::eval(&mut rng))?;
            let probs = softmax_rows(g.value(logits).data(), self.spec.n_classes);
            out.extend(probs.chunks(self.spec.n_classes).map(<[f32]>::to_vec));
        }
        Ok(out)
    }

    pub fn predict(&self, patch: &LogMelPatch) -> Result<Vec<f32>> {
        Ok(self.predict_batch(&[patch])?.remove(0))
    }

    pub fn predict_labels(&self, patches: &[&LogMelPatch]) -> Result<Vec<usize>> {
        Ok(self.predict_batch(patches)?.iter().map(|p| argmax(p)).collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.push("meta.cnn", self.spec.to_tensor());
        ck.push_store("cnn.", self.net.params());
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta = ck
            .get("meta.cnn")
            .ok_or_else(|| Error::Checkpoint("missing meta.cnn entry".into()))?;
        let spec = CnnSpec::from_tensor(meta)?;
        let mut clf = build_cnn(&spec, &mut ChaCha8Rng::seed_from_u64(0))?;
        ck.load_store("cnn.", clf.net.params_mut())?;
        Ok(clf)
    }
}

pub fn argmax(p: &[f32]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClfEpochLog {
    pub epoch: usize,
    pub loss: f64,
    /// Accuracy on the training batches as seen (dropout active).
    pub accuracy: f64,
    pub steps: usize,
}

pub struct TrainedClassifier {
    pub model: Classifier,
    pub log: Vec<ClfEpochLog>,
}

/// Minimise mean categorical cross-entropy with Adam; the max-norm
/// constraint is applied after every step.
pub fn train_classifier(
    patches: &[&LogMelPatch],
    labels: &[usize],
    spec: &CnnSpec,
    cfg: &ClfTrainConfig,
) -> Result<TrainedClassifier> {
    train_classifier_with(patches, labels, spec, cfg, |_| {})
}

pub fn train_classifier_with(
    patches: &[&LogMelPatch],
    labels: &[usize],
    spec: &CnnSpec,
    cfg: &ClfTrainConfig,
    mut on_epoch: impl FnMut(&ClfEpochLog),
) -> Result<TrainedClassifier> {
    cfg.validate()?;
    if patches.is_empty() {
        return Err(Error::Empty("no training patches".into()));
    }
    if patches.len() != labels.len() {
        return Err(Error::Dimension(format!("{} patches but {} labels", patches.len(), labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= spec.n_classes) {
        return Err(Error::Parameter(format!("label {bad} outside {} classes", spec.n_classes)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = build_cnn(spec, &mut rng)?;
    let mut opt = Adam::new(cfg.adam, model.net.params());
    let n = patches.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut steps) = (0.0f64, 0usize, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            for chunk in batch.chunks(cfg.chunk) {
                let items: Vec<&LogMelPatch> = chunk.iter().map(|&i| patches[i]).collect();
                let ys: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
                let mut g = Graph::new();
                let x = g.constant(model.batch_tensor(&items)?);
                let logits = model.net.forward(&mut g, x, &mut Mode::train(&mut rng))?;
                let ce = g.softmax_cross_entropy(logits, &ys)?;
                let value = g.value(ce).item() as f64;
                if !value.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("classifier epoch {epoch}, step {}", steps + 1),
                    });
                }
                let scaled = g.scale(ce, chunk.len() as f32 / batch.len() as f32);
                g.backward(scaled, model.net.params_mut())?;
                loss_sum += value * chunk.len() as f64;
                let lv = g.value(logits).data();
                correct += ys
                    .iter()
                    .enumerate()
                    .filter(|(r, &y)| argmax(&lv[r * spec.n_classes..][..spec.n_classes]) == y)
                    .count();
            }
            opt.step(model.net.params_mut());
            model.net.apply_constraints()?;
            steps += 1;
        }
        let entry = ClfEpochLog {
            epoch,
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
            steps,
        };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(TrainedClassifier { model, log })
}

/// One feature sample for cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSample {
    pub patch: LogMelPatch,
    pub label: usize,
    pub fold: u8,
    pub origin: Origin,
    /// Id of the original clip this sample derives from.
    pub source_id: String,
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: u8,
    pub confusion: ConfusionMatrix,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
    pub warnings: Vec<String>,
}

/// For each test fold: train on every sample from the other folds
/// (augmented ones included) and test on that fold's original samples.
pub fn cross_validate(
    samples: &[FoldSample],
    test_folds: &[u8],
    spec: &CnnSpec,
    cfg: &ClfTrainConfig,
) -> Result<CrossValidation> {
    let mut out = CrossValidation { folds: Vec::new(), warnings: Vec::new() };
    for &fold in test_folds {
        let test: Vec<&FoldSample> = samples
            .iter()
            .filter(|s| s.fold == fold && s.origin == Origin::Original)
            .collect();
        if test.is_empty() {
            return Err(Error::Empty(format!("fold {fold} has no original clips to test on")));
        }
        let test_ids: std::collections::HashSet<&str> = test.iter().map(|s| s.source_id.as_str()).collect();
        let train: Vec<&FoldSample> = samples
            .iter()
            .filter(|s| s.fold != fold && !(s.origin == Origin::ClassicalAug && test_ids.contains(s.source_id.as_str())))
            .collect();
        if train.is_empty() {
            return Err(Error::Empty(format!("no training samples outside fold {fold}")));
        }
        for c in 0..spec.n_classes {
            if !train.iter().any(|s| s.label == c) {
                out.warnings.push(format!("fold {fold}: class {c} absent from training folds"));
            }
        }
        let patches: Vec<&LogMelPatch> = train.iter().map(|s| &s.patch).collect();
        let labels: Vec<usize> = train.iter().map(|s| s.label).collect();
        let fold_cfg = ClfTrainConfig {
            seed: cfg.seed.wrapping_add(fold as u64),
            ..cfg.clone()
        };
        let trained = train_classifier(&patches, &labels, spec, &fold_cfg)?;
        let test_patches: Vec<&LogMelPatch> = test.iter().map(|s| &s.patch).collect();
        let pred = trained.model.predict_labels(&test_patches)?;
        let truth: Vec<usize> = test.iter().map(|s| s.label).collect();
        out.folds.push(FoldResult {
            fold,
            confusion: confusion_matrix(&truth, &pred, spec.n_classes)?,
            n_train: train.len(),
            n_test: test.len(),
        });
    }
    Ok(out)
}

/// Uniformly random fold in `1..=10` for each generated clip.
pub fn assign_random_folds(n: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..n).map(|_| rng.gen_range(1..=crate::dataset::N_FOLDS)).collect()
}
