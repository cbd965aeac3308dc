//! File-based pipeline behind the command-line subcommands.
//!
//! Output layout under the output directory:
//!
//! ```text
//! manifest.csv                         validated dataset manifest
//! run_<command>.txt                    reproducibility header per command
//! augmented/<scheme>/<class>/*.wav     classical augmentations (+ manifest.csv)
//! features/<class>/<origin>/*.lmel     cached log-mel matrices
//! checkpoints/<class>/gan.egan         per-class GAN (+ gan_log.csv)
//! checkpoints/classifier/<scheme>/     per-fold classifiers, logs, fold manifest
//! generated/<class>/*.wav              raw generator output
//! filtered/<class>/*.wav               generated clips that pass the filter
//! reports/<scheme>/                    confusion matrices, fold metrics, summary
//! reports/summary.csv                  one row per evaluated scheme
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::audio::{read_wav, resample, write_wav, Waveform};
use crate::augment::{build_augmented_set, write_augment_manifest, AugmentManifestRow, AugmentationScheme, SchemeKind};
use crate::autodiff::{check::gradient_check, Checkpoint, Graph, Mode, Module, Tensor};
use crate::classifier::{train_classifier, ClfEpochLog, Classifier, FoldSample};
use crate::config::PipelineConfig;
use crate::dataset::{file_stem, ingest, DatasetManifest, Origin, N_FOLDS};
use crate::error::{Error, Result};
use crate::features::{read_lmel, select_patch, write_lmel, FeatureExtractor, LogMelPatch};
use crate::gan::{build_critic, build_generator, train_gan, write_training_log, ArchConfig, EpochLog, Gan};
use crate::metrics::{
    aggregate_folds, confusion_matrix, difference_csv, difference_matrix, fold_metrics_csv, heat_table, summary_row,
    write_text, Aggregate, ConfusionMatrix, FoldMetrics, SUMMARY_HEADER,
};
use crate::simfilter::{filter_generated, write_filter_manifest, Decision, FilterOutcome};

/// Training-data scheme compared in evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Baseline,
    Classical(SchemeKind),
    Gan,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Baseline,
        Scheme::Classical(SchemeKind::TimeStretch),
        Scheme::Classical(SchemeKind::PitchShift1),
        Scheme::Classical(SchemeKind::PitchShift2),
        Scheme::Classical(SchemeKind::DrComp),
        Scheme::Classical(SchemeKind::Background),
        Scheme::Gan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Baseline => "baseline",
            Scheme::Classical(k) => k.as_str(),
            Scheme::Gan => "GAN",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Scheme::Baseline),
            "GAN" | "gan" => Ok(Scheme::Gan),
            other => SchemeKind::parse(other).map(Scheme::Classical),
        }
    }
}

fn seed_for(seed: u64, tag: &str) -> u64 {
    let d = Sha256::digest(tag.as_bytes());
    seed ^ u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Remove and recreate a directory this pipeline owns.
fn reset_dir(p: &Path) -> Result<()> {
    if p.exists() {
        fs::remove_dir_all(p).map_err(|e| Error::io(p, e))?;
    }
    create_dir(p)
}

fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "wav"))
        .collect();
    out.sort();
    Ok(out)
}

fn parse_fold_list(folds: &[u8]) -> Result<Vec<u8>> {
    if folds.is_empty() || folds.iter().any(|f| !(1..=N_FOLDS).contains(f)) {
        return Err(Error::Validation(vec![format!("folds must be within 1..{N_FOLDS}, got {folds:?}")]));
    }
    let mut f = folds.to_vec();
    f.sort_unstable();
    f.dedup();
    Ok(f)
}

pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, out: impl Into<PathBuf>) -> Self {
        Self { cfg, out: out.into() }
    }

    fn dir(&self, parts: &[&str]) -> PathBuf {
        parts.iter().fold(self.out.clone(), |p, s| p.join(s))
    }

    /// Write `run_<command>.txt`: version, config hash, seed and arguments.
    pub fn write_header(&self, command: &str, args: &[(&str, String)]) -> Result<()> {
        let mut text = format!(
            "envgan {}\ncommand = {command}\nconfig_sha256 = {}\nseed = {}\n",
            env!("CARGO_PKG_VERSION"),
            self.cfg.hash(),
            self.cfg.seed
        );
        let sorted: BTreeMap<_, _> = args.iter().cloned().collect();
        for (k, v) in sorted {
            let _ = writeln!(text, "{k} = {v}");
        }
        write_text(self.out.join(format!("run_{command}.txt")), &text)
    }

    pub fn ingest(&self, dataset_dir: &Path, manifest_csv: &Path) -> Result<DatasetManifest> {
        let m = ingest(dataset_dir, manifest_csv)?;
        create_dir(&self.out)?;
        m.write_csv(self.out.join("manifest.csv"))?;
        Ok(m)
    }

    pub fn manifest(&self) -> Result<DatasetManifest> {
        let p = self.out.join("manifest.csv");
        if !p.is_file() {
            return Err(Error::Config(format!("{} missing; run ingest first", p.display())));
        }
        DatasetManifest::read_csv(p)
    }

    fn class_id(&self, m: &DatasetManifest, class: &str) -> Result<usize> {
        m.class_id(class)
            .ok_or_else(|| Error::Validation(vec![format!("class {class:?} not in manifest")]))
    }

    fn scheme_for(&self, kind: SchemeKind) -> Result<AugmentationScheme> {
        Ok(match kind {
            SchemeKind::TimeStretch => AugmentationScheme::time_stretch(),
            SchemeKind::PitchShift1 => AugmentationScheme::pitch_shift_1(),
            SchemeKind::PitchShift2 => AugmentationScheme::pitch_shift_2(),
            SchemeKind::DrComp => AugmentationScheme::drcomp(self.cfg.drc.clone()),
            SchemeKind::Background => {
                let mut scenes = Vec::with_capacity(4);
                for (i, p) in self.cfg.scenes.iter().enumerate() {
                    let p = p
                        .as_ref()
                        .ok_or_else(|| Error::Config(format!("background.scene_{} is not set", i + 1)))?;
                    if !p.is_file() {
                        return Err(Error::Config(format!("background scene {} not found", p.display())));
                    }
                    scenes.push(read_wav(p)?);
                }
                AugmentationScheme::background(scenes)?
            }
        })
    }

    /// Augment every original clip; returns the number of files written.
    pub fn augment(&self, kind: SchemeKind) -> Result<usize> {
        let m = self.manifest()?;
        let scheme = self.scheme_for(kind)?;
        let names = m.class_names();
        let root = self.dir(&["augmented", kind.as_str()]);
        reset_dir(&root)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(self.cfg.seed, kind.as_str()));
        let mut rows = Vec::new();
        for (row, clip) in m.rows.iter().zip(m.load_clips()?) {
            for a in build_augmented_set(std::slice::from_ref(&clip), &scheme, &mut rng)? {
                let rel = PathBuf::from(&names[a.clip.label]).join(format!("{}.wav", a.clip.id));
                let path = root.join(&rel);
                create_dir(path.parent().expect("class dir"))?;
                write_wav(&a.clip.waveform.clamped(), &path)?;
                rows.push(AugmentManifestRow {
                    source_file: row.path.to_string_lossy().into_owned(),
                    output_file: rel.to_string_lossy().into_owned(),
                    scheme: kind,
                    factor: a.provenance.factor,
                    w: a.provenance.w,
                });
            }
        }
        write_augment_manifest(root.join("manifest.csv"), &rows)?;
        Ok(rows.len())
    }

    fn class_clips(&self, m: &DatasetManifest, class_id: usize) -> Result<Vec<Waveform>> {
        m.rows
            .iter()
            .filter(|r| r.class_id == class_id)
            .map(|r| read_wav(&r.path))
            .collect()
    }

    /// Train the GAN of one class and store checkpoint and log.
    pub fn gan_train(&self, class: &str) -> Result<Vec<EpochLog>> {
        let m = self.manifest()?;
        let id = self.class_id(&m, class)?;
        let clips = self.class_clips(&m, id)?;
        let mut cfg = self.cfg.gan.clone();
        cfg.seed = seed_for(self.cfg.seed, &format!("gan/{class}"));
        let trained = train_gan(&clips, &self.cfg.arch, &cfg)?;
        let dir = self.dir(&["checkpoints", class]);
        create_dir(&dir)?;
        trained.gan.to_checkpoint().save(dir.join("gan.egan"))?;
        write_training_log(dir.join("gan_log.csv"), &trained.log)?;
        Ok(trained.log)
    }

    pub fn gan_generate(&self, class: &str, count: usize) -> Result<Vec<PathBuf>> {
        let ck = self.dir(&["checkpoints", class]).join("gan.egan");
        if !ck.is_file() {
            return Err(Error::Config(format!("{} missing; run gan-train first", ck.display())));
        }
        let gan = Gan::from_checkpoint(&Checkpoint::load(&ck)?)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(self.cfg.seed, &format!("generate/{class}")));
        let dir = self.dir(&["generated", class]);
        reset_dir(&dir)?;
        gan.generate(count, &mut rng)?
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let p = dir.join(format!("gen_{i:04}.wav"));
                write_wav(w, &p)?;
                Ok(p)
            })
            .collect()
    }

    /// Bring reference clips to the generator's rate and length.
    fn condition(&self, w: &Waveform, arch: &ArchConfig) -> Result<Waveform> {
        Ok(resample(w, arch.sample_rate_hz)?.fit_length(arch.output_len())?.clamped())
    }

    pub fn gan_filter(&self, class: &str) -> Result<FilterOutcome> {
        let m = self.manifest()?;
        let id = self.class_id(&m, class)?;
        let gen_paths = list_wavs(&self.dir(&["generated", class]))?;
        if gen_paths.is_empty() {
            return Err(Error::Config(format!("no generated clips for {class}; run gan-generate first")));
        }
        let generated: Vec<Waveform> = gen_paths.iter().map(read_wav).collect::<Result<_>>()?;
        let arch = &self.cfg.arch;
        let ref_rows: Vec<_> = m.rows.iter().filter(|r| r.class_id == id).collect();
        let references: Vec<Waveform> = ref_rows
            .iter()
            .map(|r| self.condition(&read_wav(&r.path)?, arch))
            .collect::<Result<_>>()?;
        let outcome = filter_generated(&generated, &references, &self.cfg.filter)?;
        let dir = self.dir(&["filtered", class]);
        reset_dir(&dir)?;
        for r in &outcome.records {
            if r.decision == Decision::Accepted {
                let src = &gen_paths[r.generated];
                let dst = dir.join(src.file_name().expect("file name"));
                fs::copy(src, &dst).map_err(|e| Error::io(&dst, e))?;
            }
        }
        let gen_names: Vec<String> = gen_paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        let ref_names: Vec<String> = ref_rows.iter().map(|r| r.path.to_string_lossy().into_owned()).collect();
        write_filter_manifest(dir.join("filter_manifest.csv"), &outcome.records, &gen_names, &ref_names)?;
        Ok(outcome)
    }

    /// Log-mel patch of a clip, using the feature cache.
    fn patch(&self, extractor: &FeatureExtractor, wav: &Path, class: &str, origin: Origin, id: &str) -> Result<LogMelPatch> {
        let cache = self.dir(&["features", class, origin.as_str()]).join(format!("{id}.lmel"));
        let logmel = match cache.is_file() {
            true => read_lmel(&cache)?.remove(0),
            false => {
                let lm = extractor.log_mel(&read_wav(wav)?)?;
                create_dir(cache.parent().expect("cache dir"))?;
                write_lmel(&cache, std::slice::from_ref(&lm))?;
                lm
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(self.cfg.seed, &format!("patch/{class}/{id}")));
        select_patch(&logmel, self.cfg.features.patch_frames, &mut rng)
    }

    /// Every sample a scheme trains or tests on, with folds assigned.
    pub fn samples(&self, scheme: Scheme) -> Result<(Vec<FoldSample>, Vec<(String, PathBuf)>)> {
        let m = self.manifest()?;
        let names = m.class_names();
        let extractor = FeatureExtractor::new(self.cfg.features.clone())?;
        let mut samples = Vec::new();
        let mut files = Vec::new();
        let mut push = |s: FoldSample, path: PathBuf| {
            files.push((s.source_id.clone(), path));
            samples.push(s);
        };
        for r in &m.rows {
            let id = file_stem(&r.path);
            let patch = self.patch(&extractor, &r.path, &names[r.class_id], Origin::Original, &id)?;
            push(
                FoldSample { patch, label: r.class_id, fold: r.fold, origin: Origin::Original, source_id: id },
                r.path.clone(),
            );
        }
        match scheme {
            Scheme::Baseline => {}
            Scheme::Classical(kind) => {
                let root = self.dir(&["augmented", kind.as_str()]);
                let man = root.join("manifest.csv");
                if !man.is_file() {
                    return Err(Error::Config(format!("{} missing; run augment --scheme {kind} first", man.display())));
                }
                let by_path: HashMap<String, (usize, u8)> = m
                    .rows
                    .iter()
                    .map(|r| (r.path.to_string_lossy().into_owned(), (r.class_id, r.fold)))
                    .collect();
                let mut reader = csv::Reader::from_path(&man)?;
                for rec in reader.records() {
                    let rec = rec?;
                    let (src, out) = (&rec[0], &rec[1]);
                    let &(label, fold) = by_path
                        .get(src)
                        .ok_or_else(|| Error::Validation(vec![format!("augmented clip source {src} not in manifest")]))?;
                    let path = root.join(out);
                    let id = file_stem(&path);
                    let patch = self.patch(&extractor, &path, &names[label], Origin::ClassicalAug, &id)?;
                    push(
                        FoldSample {
                            patch,
                            label,
                            fold,
                            origin: Origin::ClassicalAug,
                            source_id: file_stem(Path::new(src)),
                        },
                        path,
                    );
                }
            }
            Scheme::Gan => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed_for(self.cfg.seed, "gan-folds"));
                for (label, class) in names.iter().enumerate() {
                    for path in list_wavs(&self.dir(&["filtered", class]))? {
                        let id = file_stem(&path);
                        let patch = self.patch(&extractor, &path, class, Origin::Gan, &id)?;
                        let fold = rng.gen_range(1..=N_FOLDS);
                        push(
                            FoldSample { patch, label, fold, origin: Origin::Gan, source_id: format!("{class}/{id}") },
                            path,
                        );
                    }
                }
            }
        }
        Ok((samples, files))
    }

    /// Compute and cache features for originals and every augmentation present.
    pub fn preprocess(&self) -> Result<usize> {
        let mut n = self.samples(Scheme::Baseline)?.0.len();
        for scheme in Scheme::ALL.into_iter().skip(1) {
            let present = match scheme {
                Scheme::Classical(k) => self.dir(&["augmented", k.as_str()]).join("manifest.csv").is_file(),
                _ => self.out.join("filtered").is_dir(),
            };
            if present {
                let (s, _) = self.samples(scheme)?;
                n += s.iter().filter(|s| s.origin != Origin::Original).count();
            }
        }
        Ok(n)
    }

    /// Train one classifier per test fold on the other folds' samples.
    pub fn clf_train(&self, scheme: Scheme, folds: &[u8]) -> Result<Vec<(u8, Vec<ClfEpochLog>)>> {
        let folds = parse_fold_list(folds)?;
        let m = self.manifest()?;
        let n_classes = m.n_classes();
        let (samples, files) = self.samples(scheme)?;
        let dir = self.dir(&["checkpoints", "classifier", scheme.as_str()]);
        create_dir(&dir)?;
        let mut fm = String::from("file,fold,class_id,origin\n");
        for (s, (_, path)) in samples.iter().zip(&files) {
            // paths inside the output tree are stored relative to it
            let shown = path.strip_prefix(&self.out).unwrap_or(path);
            let _ = writeln!(fm, "{},{},{},{}", shown.display(), s.fold, s.label, s.origin.as_str());
        }
        write_text(dir.join("fold_manifest.csv"), &fm)?;

        let spec = crate::classifier::CnnSpec { n_classes, ..self.cfg.cnn.clone() };
        let mut logs = Vec::new();
        for fold in folds {
            let test_ids: HashSet<&str> = samples
                .iter()
                .filter(|s| s.fold == fold && s.origin == Origin::Original)
                .map(|s| s.source_id.as_str())
                .collect();
            let train: Vec<&FoldSample> = samples
                .iter()
                .filter(|s| s.fold != fold && !(s.origin == Origin::ClassicalAug && test_ids.contains(s.source_id.as_str())))
                .collect();
            let patches: Vec<&LogMelPatch> = train.iter().map(|s| &s.patch).collect();
            let labels: Vec<usize> = train.iter().map(|s| s.label).collect();
            let cfg = crate::classifier::ClfTrainConfig {
                seed: seed_for(self.cfg.seed, &format!("clf/{}/{fold}", scheme.as_str())),
                ..self.cfg.clf.clone()
            };
            let trained = train_classifier(&patches, &labels, &spec, &cfg)?;
            trained.model.to_checkpoint().save(dir.join(format!("fold{fold}.egan")))?;
            let mut log = String::from("epoch,loss,accuracy,steps\n");
            for e in &trained.log {
                let _ = writeln!(log, "{},{:.8e},{:.6},{}", e.epoch, e.loss, e.accuracy, e.steps);
            }
            write_text(dir.join(format!("train_log_fold{fold}.csv")), &log)?;
            logs.push((fold, trained.log));
        }
        Ok(logs)
    }

    /// Test each fold's classifier on that fold's original clips and write
    /// the per-fold and summary reports. Returns the summary row.
    pub fn evaluate(&self, scheme: Scheme, folds: &[u8]) -> Result<(String, Aggregate)> {
        let folds = parse_fold_list(folds)?;
        let m = self.manifest()?;
        let names = m.class_names();
        let n_classes = m.n_classes();
        let (samples, _) = self.samples(Scheme::Baseline)?;
        let ck_dir = self.dir(&["checkpoints", "classifier", scheme.as_str()]);
        let rep = self.dir(&["reports", scheme.as_str()]);
        create_dir(&rep)?;
        let mut total = ConfusionMatrix::zeros(n_classes);
        let mut per_fold = Vec::new();
        for fold in folds.iter().copied() {
            let ck = ck_dir.join(format!("fold{fold}.egan"));
            if !ck.is_file() {
                return Err(Error::Config(format!("{} missing; run clf-train first", ck.display())));
            }
            let model = Classifier::from_checkpoint(&Checkpoint::load(&ck)?)?;
            let test: Vec<&FoldSample> = samples.iter().filter(|s| s.fold == fold).collect();
            if test.is_empty() {
                return Err(Error::Validation(vec![format!("fold {fold} has no clips")]));
            }
            let patches: Vec<&LogMelPatch> = test.iter().map(|s| &s.patch).collect();
            let pred = model.predict_labels(&patches)?;
            let truth: Vec<usize> = test.iter().map(|s| s.label).collect();
            let cm = confusion_matrix(&truth, &pred, n_classes)?;
            write_text(rep.join(format!("confusion_fold{fold}.csv")), &cm.to_csv(&names))?;
            total.add(&cm)?;
            per_fold.push((fold as usize, FoldMetrics::from_confusion(&cm)?));
        }
        write_text(rep.join("confusion_total.csv"), &total.to_csv(&names))?;
        write_text(rep.join("fold_metrics.csv"), &fold_metrics_csv(&per_fold))?;
        let agg = aggregate_folds(&per_fold.iter().map(|(_, m)| *m).collect::<Vec<_>>())?;
        let row = summary_row(scheme.as_str(), folds.len(), &agg);
        write_text(rep.join("summary.csv"), &format!("{SUMMARY_HEADER}\n{row}\n"))?;
        Ok((row, agg))
    }

    /// Collect every evaluated scheme into `reports/summary.csv` and write
    /// difference matrices against the baseline.
    pub fn report(&self) -> Result<String> {
        let m = self.manifest()?;
        let names = m.class_names();
        let mut summary = format!("{SUMMARY_HEADER}\n");
        let mut found = 0;
        let baseline = self.read_total_confusion(Scheme::Baseline)?;
        for scheme in Scheme::ALL {
            let p = self.dir(&["reports", scheme.as_str()]).join("summary.csv");
            if !p.is_file() {
                continue;
            }
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            if let Some(row) = text.lines().nth(1) {
                summary.push_str(row);
                summary.push('\n');
                found += 1;
            }
            if let (Some(base), Some(cm), false) = (&baseline, self.read_total_confusion(scheme)?, scheme == Scheme::Baseline) {
                let d = difference_matrix(&cm, base)?;
                let rep = self.dir(&["reports", scheme.as_str()]);
                write_text(rep.join("difference_vs_baseline.csv"), &difference_csv(&names, &d))?;
                write_text(rep.join("difference_vs_baseline.txt"), &heat_table(&names, &d))?;
            }
        }
        if found == 0 {
            return Err(Error::Config("no evaluated schemes; run evaluate first".into()));
        }
        write_text(self.dir(&["reports"]).join("summary.csv"), &summary)?;
        Ok(summary)
    }

    fn read_total_confusion(&self, scheme: Scheme) -> Result<Option<ConfusionMatrix>> {
        let p = self.dir(&["reports", scheme.as_str()]).join("confusion_total.csv");
        if !p.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let rows: Vec<Vec<u64>> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').skip(1).map(|v| v.parse().map_err(|_| Error::Validation(vec![format!("bad count {v:?} in {}", p.display())]))).collect())
            .collect::<Result<_>>()?;
        ConfusionMatrix::from_rows(&rows).map(Some)
    }
}

/// Gradient checks on small instances of every layer kind plus
/// architecture shape conformance. Returns one line per check.
pub fn selftest() -> Result<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut lines = Vec::new();
    let mut rand_t = |shape: &[usize]| Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0));
    let weights = rand_t(&[64]);
    let dot = move |g: &mut Graph<f64>, y: crate::autodiff::NodeId| -> Result<crate::autodiff::NodeId> {
        let n = g.value(y).len();
        let flat = g.reshape(y, &[n])?;
        let w = g.constant(Tensor::new(vec![n], weights.data()[..n].to_vec())?);
        let p = g.mul(flat, w)?;
        Ok(g.sum_all(p))
    };
    type Build = Box<dyn Fn(&mut Graph<f64>, &[crate::autodiff::NodeId]) -> Result<crate::autodiff::NodeId>>;
    let d = dot.clone();
    let cases: Vec<(&str, Vec<Tensor<f64>>, Build)> = vec![
        ("dense", vec![rand_t(&[2, 3]), rand_t(&[3, 4])], {
            let d = d.clone();
            Box::new(move |g, x| {
                let y = g.matmul(x[0], x[1])?;
                d(g, y)
            })
        }),
        ("conv1d", vec![rand_t(&[1, 7, 2]), rand_t(&[3, 2, 2])], {
            let d = d.clone();
            Box::new(move |g, x| {
                let y = g.conv1d(x[0], x[1], 2, (1, 1))?;
                d(g, y)
            })
        }),
        ("tconv1d", vec![rand_t(&[1, 3, 2]), rand_t(&[4, 2, 2])], {
            let d = d.clone();
            Box::new(move |g, x| {
                let y = g.tconv1d(x[0], x[1], 2)?;
                d(g, y)
            })
        }),
        ("conv2d", vec![rand_t(&[1, 4, 3, 1]), rand_t(&[3, 3, 1, 2])], {
            let d = d.clone();
            Box::new(move |g, x| {
                let y = g.conv2d_same(x[0], x[1])?;
                d(g, y)
            })
        }),
        ("maxpool2d", vec![rand_t(&[1, 4, 4, 2])], {
            let d = d.clone();
            Box::new(move |g, x| {
                let y = g.maxpool2d(x[0], 2, 2)?;
                d(g, y)
            })
        }),
        ("tanh", vec![rand_t(&[6])], {
            let d = d.clone();
            Box::new(move |g, x| {
                let y = g.tanh(x[0]);
                d(g, y)
            })
        }),
        ("leaky_relu", vec![rand_t(&[6])], {
            let d = d.clone();
            Box::new(move |g, x| {
                let y = g.leaky_relu(x[0], 0.2);
                d(g, y)
            })
        }),
        ("softmax+ce", vec![rand_t(&[3, 4])], Box::new(|g, x| g.softmax_cross_entropy(x[0], &[0, 3, 1]))),
    ];
    for (name, inputs, f) in cases {
        let err = gradient_check(&inputs, 1e-5, f)?;
        if !(err < 1e-4) {
            return Err(Error::Validation(vec![format!("gradient check {name}: relative error {err:.3e}")]));
        }
        lines.push(format!("gradient {name}: max relative error {err:.2e}"));
    }

    let arch = ArchConfig::paper_with_d(2);
    let generator = build_generator::<f32, _>(&arch, &mut rng)?;
    let critic = build_critic::<f32, _>(&arch, &mut rng)?;
    let mut g = Graph::new();
    let z = g.constant(Tensor::zeros(&[1, arch.latent_dim]));
    let x = generator.forward(&mut g, z, &mut Mode::eval(&mut rng))?;
    let score = critic.forward(&mut g, x, &mut Mode::eval(&mut rng))?;
    let (gs, cs) = (g.shape(x).to_vec(), g.shape(score).to_vec());
    if gs != [1, arch.output_len(), arch.channels] || cs != [1, 1] {
        return Err(Error::Validation(vec![format!("shape conformance: generator {gs:?}, critic {cs:?}")]));
    }
    lines.push(format!(
        "shapes: generator {} rows -> {gs:?}, critic {} rows -> {cs:?}",
        generator.layers().len() + 1,
        critic.layers().len() + 1
    ));
    Ok(lines)
}

/// Map an error to the command-line exit status: 1 for validation and
/// configuration problems, 2 for runtime failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Config(_) | Error::Parameter(_) => 1,
        _ => 2,
    }
}
