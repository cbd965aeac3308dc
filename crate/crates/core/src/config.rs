//! Flat `key = value` pipeline configuration.
//!
//! Every key has a default; a file only lists the keys it changes. Unknown
//! keys and malformed values are rejected with the line number.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::augment::{DrcProfile, DRC_PROFILE_NAMES};
use crate::autodiff::AdamConfig;
use crate::classifier::{ClfTrainConfig, CnnSpec};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::gan::{ArchConfig, GanTrainConfig, LadderStep, Width};
use crate::simfilter::FilterConfig;

pub const PAPER_CFG: &str = include_str!("../configs/paper.cfg");
pub const DESK_CFG: &str = include_str!("../configs/desk.cfg");

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub features: FeatureConfig,
    pub arch: ArchConfig,
    pub gan: GanTrainConfig,
    pub generate_count: usize,
    pub cnn: CnnSpec,
    pub clf: ClfTrainConfig,
    pub drc: Vec<DrcProfile>,
    pub scenes: [Option<PathBuf>; 4],
    pub filter: FilterConfig,
    pub folds: Vec<u8>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            features: FeatureConfig::default(),
            arch: ArchConfig::paper(),
            gan: GanTrainConfig::default(),
            generate_count: 50,
            cnn: CnnSpec::default(),
            clf: ClfTrainConfig::default(),
            drc: DRC_PROFILE_NAMES.iter().map(|n| DrcProfile::named(n).expect("built-in profile")).collect(),
            scenes: Default::default(),
            filter: FilterConfig::default(),
            folds: (1..=10).collect(),
        }
    }
}

fn parse_ladder(s: &str) -> Result<Vec<LadderStep>> {
    s.split(',')
        .map(|part| {
            let (stride, width) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("ladder step {part:?} is not stride:width")))?;
            let stride = stride
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad ladder stride {stride:?}")))?;
            let width = match width.trim() {
                "c" => Width::Channels,
                w => Width::TimesD(
                    w.strip_suffix('d')
                        .and_then(|m| m.parse().ok())
                        .ok_or_else(|| Error::Config(format!("bad ladder width {w:?}; use <m>d or c")))?,
                ),
            };
            Ok(LadderStep { stride, width })
        })
        .collect()
}

fn ladder_string(ladder: &[LadderStep]) -> String {
    ladder
        .iter()
        .map(|s| match s.width {
            Width::Channels => format!("{}:c", s.stride),
            Width::TimesD(m) => format!("{}:{m}d", s.stride),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_folds(s: &str) -> Result<Vec<u8>> {
    let folds: Vec<u8> = s
        .split(',')
        .map(|f| f.trim().parse().map_err(|_| Error::Config(format!("bad fold {f:?}"))))
        .collect::<Result<_>>()?;
    if folds.is_empty() || folds.iter().any(|f| !(1..=10).contains(f)) {
        return Err(Error::Config(format!("folds must be in 1..10, got {s:?}")));
    }
    Ok(folds)
}

impl PipelineConfig {
    /// `paper` or `desk` name a built-in profile; anything else is a path.
    pub fn load(name_or_path: &str) -> Result<Self> {
        match name_or_path {
            "paper" | "paper.cfg" if !Path::new(name_or_path).exists() => Self::parse(PAPER_CFG),
            "desk" | "desk.cfg" if !Path::new(name_or_path).exists() => Self::parse(DESK_CFG),
            path => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Self::parse(&text)
            }
        }
    }

    pub fn paper() -> Self {
        Self::parse(PAPER_CFG).expect("bundled paper.cfg parses")
    }

    pub fn desk() -> Self {
        Self::parse(DESK_CFG).expect("bundled desk.cfg parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), i + 1).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {key}", i + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, e.to_string().trim_start_matches("configuration error: "))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
            }
        }
        let f = &mut self.features;
        match key {
            "seed" => self.seed = num(key, value)?,
            "audio.sample_rate" => {
                f.sample_rate_hz = num(key, value)?;
                self.arch.sample_rate_hz = f.sample_rate_hz;
            }
            "features.frame_len" => f.frame_len = num(key, value)?,
            "features.hop" => f.hop = num(key, value)?,
            "features.n_mels" => f.n_mels = num(key, value)?,
            "features.fmin_hz" => f.fmin_hz = num(key, value)?,
            "features.fmax_hz" => f.fmax_hz = num(key, value)?,
            "features.eps_floor" => f.eps_floor = num(key, value)?,
            "features.patch_frames" => f.patch_frames = num(key, value)?,
            "gan.d" => self.arch.d = num(key, value)?,
            "gan.channels" => self.arch.channels = num(key, value)?,
            "gan.latent_dim" => self.arch.latent_dim = num(key, value)?,
            "gan.base_len" => self.arch.base_len = num(key, value)?,
            "gan.base_width" => self.arch.base_width = num(key, value)?,
            "gan.kernel_len" => self.arch.kernel_len = num(key, value)?,
            "gan.ladder" => self.arch.ladder = parse_ladder(value)?,
            "gan.phase_shuffle" => self.arch.phase_shuffle = num(key, value)?,
            "gan.leaky_slope" => self.arch.leaky_slope = num(key, value)?,
            "gan.batch_size" => self.gan.batch_size = num(key, value)?,
            "gan.n_critic" => self.gan.n_critic = num(key, value)?,
            "gan.lambda_gp" => self.gan.lambda_gp = num(key, value)?,
            "gan.alpha" => self.gan.adam.alpha = num(key, value)?,
            "gan.beta1" => self.gan.adam.beta1 = num(key, value)?,
            "gan.beta2" => self.gan.adam.beta2 = num(key, value)?,
            "gan.epochs" => self.gan.epochs = num(key, value)?,
            "gan.generate_count" => self.generate_count = num(key, value)?,
            "clf.batch_size" => self.clf.batch_size = num(key, value)?,
            "clf.epochs" => self.clf.epochs = num(key, value)?,
            "clf.alpha" => self.clf.adam.alpha = num(key, value)?,
            "clf.beta1" => self.clf.adam.beta1 = num(key, value)?,
            "clf.beta2" => self.clf.adam.beta2 = num(key, value)?,
            "clf.chunk" => self.clf.chunk = num(key, value)?,
            "clf.dropout" => self.cnn.dropout = num(key, value)?,
            "clf.dense_units" => self.cnn.dense_units = num(key, value)?,
            "clf.max_norm" => {
                self.cnn.max_norm = match value {
                    "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            "filter.threshold" => self.filter.threshold = num(key, value)?,
            "filter.guard" => self.filter.guard = num(key, value)?,
            "filter.reject_above" => self.filter.reject_above = flag(key, value)?,
            "folds" => self.folds = parse_folds(value)?,
            _ => {
                if let Some(n) = key.strip_prefix("background.scene_") {
                    let idx: usize = n.parse().ok().filter(|i| (1..=4).contains(i)).ok_or_else(|| Error::Config(format!("unknown key {key}")))?;
                    self.scenes[idx - 1] = (!value.is_empty()).then(|| PathBuf::from(value));
                    return Ok(());
                }
                let Some((profile, field)) = key.strip_prefix("drc.").and_then(|k| k.split_once('.')) else {
                    return Err(Error::Config(format!("unknown key {key}")));
                };
                let p = self
                    .drc
                    .iter_mut()
                    .find(|p| p.name == profile)
                    .ok_or_else(|| Error::Config(format!("unknown key {key}")))?;
                let v: f64 = num(key, value)?;
                match field {
                    "threshold_db" => p.threshold_db = v,
                    "ratio" => p.ratio = v,
                    "knee_db" => p.knee_db = v,
                    "attack_ms" => p.attack_ms = v,
                    "release_ms" => p.release_ms = v,
                    "makeup_gain_db" => p.makeup_gain_db = v,
                    _ => return Err(Error::Config(format!("unknown key {key}"))),
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.gan.validate()?;
        self.clf.validate()?;
        self.cnn.validate()?;
        AdamConfig::validate(&self.gan.adam)?;
        for p in &self.drc {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.features.patch_frames != self.cnn.input.0 || self.features.n_mels != self.cnn.input.1 {
            return Err(Error::Config(format!(
                "patch {}×{} does not match the classifier input {:?}",
                self.features.patch_frames, self.features.n_mels, self.cnn.input
            )));
        }
        if !(self.filter.guard > 0.0) {
            return Err(Error::Config("filter.guard must be positive".into()));
        }
        Ok(())
    }

    /// Every key with its resolved value, sorted; the canonical form hashed
    /// into run headers.
    pub fn to_text(&self) -> String {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            kv.insert(k.to_string(), v);
        };
        let f = &self.features;
        put("seed", self.seed.to_string());
        put("audio.sample_rate", f.sample_rate_hz.to_string());
        put("features.frame_len", f.frame_len.to_string());
        put("features.hop", f.hop.to_string());
        put("features.n_mels", f.n_mels.to_string());
        put("features.fmin_hz", f.fmin_hz.to_string());
        put("features.fmax_hz", f.fmax_hz.to_string());
        put("features.eps_floor", f.eps_floor.to_string());
        put("features.patch_frames", f.patch_frames.to_string());
        let a = &self.arch;
        put("gan.d", a.d.to_string());
        put("gan.channels", a.channels.to_string());
        put("gan.latent_dim", a.latent_dim.to_string());
        put("gan.base_len", a.base_len.to_string());
        put("gan.base_width", a.base_width.to_string());
        put("gan.kernel_len", a.kernel_len.to_string());
        put("gan.ladder", ladder_string(&a.ladder));
        put("gan.phase_shuffle", a.phase_shuffle.to_string());
        put("gan.leaky_slope", a.leaky_slope.to_string());
        let g = &self.gan;
        put("gan.batch_size", g.batch_size.to_string());
        put("gan.n_critic", g.n_critic.to_string());
        put("gan.lambda_gp", g.lambda_gp.to_string());
        put("gan.alpha", g.adam.alpha.to_string());
        put("gan.beta1", g.adam.beta1.to_string());
        put("gan.beta2", g.adam.beta2.to_string());
        put("gan.epochs", g.epochs.to_string());
        put("gan.generate_count", self.generate_count.to_string());
        let c = &self.clf;
        put("clf.batch_size", c.batch_size.to_string());
        put("clf.epochs", c.epochs.to_string());
        put("clf.alpha", c.adam.alpha.to_string());
        put("clf.beta1", c.adam.beta1.to_string());
        put("clf.beta2", c.adam.beta2.to_string());
        put("clf.chunk", c.chunk.to_string());
        put("clf.dropout", self.cnn.dropout.to_string());
        put("clf.dense_units", self.cnn.dense_units.to_string());
        put("clf.max_norm", self.cnn.max_norm.map_or("none".into(), |v| v.to_string()));
        for p in &self.drc {
            let k = |f: &str| format!("drc.{}.{f}", p.name);
            put(&k("threshold_db"), p.threshold_db.to_string());
            put(&k("ratio"), p.ratio.to_string());
            put(&k("knee_db"), p.knee_db.to_string());
            put(&k("attack_ms"), p.attack_ms.to_string());
            put(&k("release_ms"), p.release_ms.to_string());
            put(&k("makeup_gain_db"), p.makeup_gain_db.to_string());
        }
        for (i, s) in self.scenes.iter().enumerate() {
            put(
                &format!("background.scene_{}", i + 1),
                s.as_ref().map(|p| p.to_string_lossy().into_owned()).unwrap_or_default(),
            );
        }
        put("filter.threshold", self.filter.threshold.to_string());
        put("filter.guard", self.filter.guard.to_string());
        put("filter.reject_above", self.filter.reject_above.to_string());
        put("folds", self.folds.iter().map(u8::to_string).collect::<Vec<_>>().join(","));
        let mut out = String::new();
        for (k, v) in kv {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hex SHA-256 of [`PipelineConfig::to_text`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_profiles_parse() {
        let paper = PipelineConfig::paper();
        assert_eq!(paper.arch, ArchConfig::paper());
        assert_eq!(paper.gan, GanTrainConfig::default());
        assert_eq!(paper.clf, ClfTrainConfig::default());
        let desk = PipelineConfig::desk();
        assert_eq!(desk.arch.output_len(), 768);
        assert_ne!(paper.hash(), desk.hash());
    }

    #[test]
    fn canonical_text_round_trips() {
        for cfg in [PipelineConfig::paper(), PipelineConfig::desk()] {
            assert_eq!(PipelineConfig::parse(&cfg.to_text()).unwrap(), cfg);
        }
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(PipelineConfig::parse("gan.epochz = 3").is_err());
        assert!(PipelineConfig::parse("gan.epochs = three").is_err());
        assert!(PipelineConfig::parse("gan.epochs").is_err());
        assert!(PipelineConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(PipelineConfig::parse("drc.loud.ratio = 2").is_err());
        assert!(PipelineConfig::parse("drc.speech.ratio = 0.5").is_err());
        assert!(PipelineConfig::parse("folds = 0,1").is_err());
        let err = PipelineConfig::parse("# c\n\nbogus = 1").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let cfg = PipelineConfig::parse("gan.ladder = 2:3d, 2:c\nclf.max_norm = none\nbackground.scene_2 = /x.wav").unwrap();
        assert_eq!(cfg.arch.output_len(), 64);
        assert_eq!(cfg.cnn.max_norm, None);
        assert_eq!(cfg.scenes[1], Some(PathBuf::from("/x.wav")));
    }
}
