use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{build_critic, build_generator, ArchConfig};
use super::loss::{critic_loss, generator_loss};
use crate::audio::{resample, Waveform};
use crate::autodiff::{Adam, AdamConfig, Checkpoint, Graph, Mode, Module, Network, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GanTrainConfig {
    pub batch_size: usize,
    pub n_critic: usize,
    pub lambda_gp: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            n_critic: 5,
            lambda_gp: 10.0,
            adam: AdamConfig {
                alpha: 1e-4,
                beta1: 0.5,
                beta2: 0.9,
                epsilon: 1e-8,
            },
            epochs: 2500,
            seed: 0,
        }
    }
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.n_critic == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size, critic steps and epochs must be positive".into()));
        }
        if !(self.lambda_gp >= 0.0) {
            return Err(Error::Config(format!("lambda_gp must be non-negative, got {}", self.lambda_gp)));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub critic_loss: f64,
    pub gen_loss: f64,
    pub wasserstein: f64,
}

/// Write the per-epoch training log as CSV.
pub fn write_training_log(path: impl AsRef<Path>, log: &[EpochLog]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,critic_loss,gen_loss,wasserstein_estimate\n");
    for e in log {
        out.push_str(&format!("{},{:.8e},{:.8e},{:.8e}\n", e.epoch, e.critic_loss, e.gen_loss, e.wasserstein));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// A generator/critic pair with its architecture.
#[derive(Debug, Clone)]
pub struct Gan {
    pub arch: ArchConfig,
    pub generator: Network<f32>,
    pub critic: Network<f32>,
}

impl Gan {
    pub fn new<R: Rng + ?Sized>(arch: ArchConfig, rng: &mut R) -> Result<Self> {
        let generator = build_generator(&arch, rng)?;
        let critic = build_critic(&arch, rng)?;
        Ok(Self { arch, generator, critic })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.push("meta.arch", self.arch.to_tensor());
        ck.push_store("generator.", self.generator.params());
        ck.push_store("critic.", self.critic.params());
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let arch = ArchConfig::from_tensor(
            ck.get("meta.arch")
                .ok_or_else(|| Error::Checkpoint("missing meta.arch".into()))?,
        )?;
        // Parameters are overwritten below; the seed only fills placeholders.
        let mut gan = Self::new(arch, &mut ChaCha8Rng::seed_from_u64(0))?;
        ck.load_store("generator.", gan.generator.params_mut())?;
        ck.load_store("critic.", gan.critic.params_mut())?;
        Ok(gan)
    }

    /// Draw `n` waveforms from the generator.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Waveform>> {
        let len = self.arch.output_len();
        let mut out = Vec::with_capacity(n);
        let mut remaining = n;
        while remaining > 0 {
            let b = remaining.min(16);
            let z = sample_latent(b, self.arch.latent_dim, rng);
            let mut g = Graph::new();
            let zn = g.constant(z);
            let mut sub = ChaCha8Rng::seed_from_u64(rng.gen());
            let y = self.generator.forward(&mut g, zn, &mut Mode::eval(&mut sub))?;
            let data = g.value(y).data();
            let per = len * self.arch.channels;
            for item in data.chunks(per) {
                let mono: Vec<f32> = item
                    .chunks(self.arch.channels)
                    .map(|c| c.iter().sum::<f32>() / c.len() as f32)
                    .collect();
                out.push(Waveform::new(mono, self.arch.sample_rate_hz)?);
            }
            remaining -= b;
        }
        Ok(out)
    }
}

/// Latent batch `[b, dim]`, i.i.d. uniform on [−1, 1].
pub fn sample_latent<R: Rng + ?Sized>(b: usize, dim: usize, rng: &mut R) -> Tensor<f32> {
    Tensor::from_fn(&[b, dim], |_| rng.gen_range(-1.0f32..=1.0))
}

/// Resample, pad/crop and clamp clips into a `[n, len, channels]`-ready list.
pub fn condition_clips(clips: &[Waveform], arch: &ArchConfig) -> Result<Vec<Vec<f32>>> {
    clips
        .iter()
        .map(|w| {
            let w = resample(w, arch.sample_rate_hz)?;
            let w = w.fit_length(arch.output_len())?.clamped();
            Ok(w
                .samples()
                .iter()
                .flat_map(|&s| std::iter::repeat(s).take(arch.channels))
                .collect())
        })
        .collect()
}

pub struct TrainedGan {
    pub gan: Gan,
    pub log: Vec<EpochLog>,
}

/// WGAN-GP training on the clips of one class. One epoch is
/// `ceil(n_clips / batch)` groups of `n_critic` critic updates followed by
/// one generator update; batches are drawn with replacement when the class
/// has fewer clips than the batch size.
pub fn train_gan(clips: &[Waveform], arch: &ArchConfig, cfg: &GanTrainConfig) -> Result<TrainedGan> {
    train_gan_with(clips, arch, cfg, |_| {})
}

pub fn train_gan_with(
    clips: &[Waveform],
    arch: &ArchConfig,
    cfg: &GanTrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainedGan> {
    if clips.is_empty() {
        return Err(Error::Empty("no clips to train on".into()));
    }
    arch.validate()?;
    cfg.validate()?;
    let data = condition_clips(clips, arch)?;
    let per = arch.output_len() * arch.channels;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gan = Gan::new(arch.clone(), &mut rng)?;
    let mut opt_c = Adam::new(cfg.adam, gan.critic.params());
    let mut opt_g = Adam::new(cfg.adam, gan.generator.params());
    let b = cfg.batch_size;
    let groups = clips.len().div_ceil(b);
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let (mut c_sum, mut w_sum, mut g_sum) = (0.0, 0.0, 0.0);
        for group in 0..groups {
            for step in 0..cfg.n_critic {
                let idx: Vec<usize> = if data.len() >= b {
                    sample(&mut rng, data.len(), b).into_vec()
                } else {
                    (0..b).map(|_| rng.gen_range(0..data.len())).collect()
                };
                let mut real = Vec::with_capacity(b * per);
                for &i in &idx {
                    real.extend_from_slice(&data[i]);
                }
                let real = Tensor::new(vec![b, arch.output_len(), arch.channels], real)?;
                let z = sample_latent(b, arch.latent_dim, &mut rng);
                let fake = {
                    let mut g = Graph::new();
                    let zn = g.constant(z);
                    let y = gan.generator.forward(&mut g, zn, &mut Mode::train(&mut rng))?;
                    g.value(y).clone()
                };
                let mut g = Graph::new();
                let parts = critic_loss(&mut g, &gan.critic, &real, &fake, cfg.lambda_gp, &mut Mode::train(&mut rng))?;
                let value = g.value(parts.loss).item() as f64;
                if !value.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("epoch {epoch}, group {group}, critic step {step}"),
                    });
                }
                g.backward(parts.loss, gan.critic.params_mut())?;
                opt_c.step(gan.critic.params_mut());
                c_sum += value;
                w_sum += parts.wasserstein();
            }
            let z = sample_latent(b, arch.latent_dim, &mut rng);
            let mut g = Graph::new();
            let loss = generator_loss(&mut g, &gan.critic, &gan.generator, &z, &mut Mode::train(&mut rng))?;
            let value = g.value(loss).item() as f64;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("epoch {epoch}, group {group}, generator step"),
                });
            }
            g.backward(loss, gan.generator.params_mut())?;
            opt_g.step(gan.generator.params_mut());
            g_sum += value;
        }
        let critic_steps = (groups * cfg.n_critic) as f64;
        let entry = EpochLog {
            epoch,
            critic_loss: c_sum / critic_steps,
            gen_loss: g_sum / groups as f64,
            wasserstein: w_sum / critic_steps,
        };
        on_epoch(&entry);
        log.push(entry);
    }
    debug_assert_eq!(opt_g.steps() as usize, cfg.epochs * groups);
    Ok(TrainedGan { gan, log })
}
