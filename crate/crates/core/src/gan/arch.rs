use rand::Rng;

use crate::autodiff::{LayerSpec, Network, Scalar, Tensor};
use crate::error::{Error, Result};

/// Channel width of one up-sampling stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Width {
    /// A multiple of the model width `d`.
    TimesD(usize),
    /// The audio channel count `c`.
    Channels,
}

impl Width {
    pub fn resolve(self, d: usize, channels: usize) -> usize {
        match self {
            Width::TimesD(m) => m * d,
            Width::Channels => channels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LadderStep {
    pub stride: usize,
    pub width: Width,
}

/// Generator/critic geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    /// Model width multiplier.
    pub d: usize,
    pub channels: usize,
    pub latent_dim: usize,
    pub base_len: usize,
    /// Width of the reshaped dense output, as a multiple of `d`.
    pub base_width: usize,
    pub kernel_len: usize,
    pub ladder: Vec<LadderStep>,
    pub phase_shuffle: usize,
    pub leaky_slope: f64,
    pub sample_rate_hz: u32,
}

fn step(stride: usize, width: Width) -> LadderStep {
    LadderStep { stride, width }
}

impl ArchConfig {
    /// Full-size geometry: 16 × 192d seed, six stride-4 and one stride-3
    /// up-convolutions, 196608 output samples.
    pub fn paper() -> Self {
        Self::paper_with_d(64)
    }

    pub fn paper_with_d(d: usize) -> Self {
        use Width::*;
        Self {
            d,
            channels: 1,
            latent_dim: 100,
            base_len: 16,
            base_width: 192,
            kernel_len: 25,
            ladder: vec![
                step(4, TimesD(96)),
                step(4, TimesD(48)),
                step(4, TimesD(24)),
                step(4, TimesD(12)),
                step(4, TimesD(6)),
                step(4, TimesD(3)),
                step(3, Channels),
            ],
            phase_shuffle: 2,
            leaky_slope: 0.2,
            sample_rate_hz: 44_100,
        }
    }

    /// Reduced geometry for quick experiments: 768 output samples.
    pub fn desk() -> Self {
        use Width::*;
        Self {
            d: 2,
            base_width: 4,
            ladder: vec![step(4, TimesD(2)), step(4, TimesD(1)), step(3, Channels)],
            ..Self::paper()
        }
    }

    pub fn output_len(&self) -> usize {
        self.base_len * self.ladder.iter().map(|s| s.stride).product::<usize>()
    }

    /// Channel widths from the reshaped seed through every ladder stage.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.base_width * self.d)
            .chain(self.ladder.iter().map(|s| s.width.resolve(self.d, self.channels)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("invalid architecture: {m}")));
        if self.d == 0 || self.channels == 0 || self.latent_dim == 0 || self.base_len == 0 || self.base_width == 0 {
            return fail("d, channels, latent_dim, base_len and base_width must be positive".into());
        }
        if self.kernel_len == 0 {
            return fail("kernel length must be positive".into());
        }
        if self.ladder.is_empty() {
            return fail("ladder is empty".into());
        }
        if self.ladder.iter().any(|s| s.stride == 0) {
            return fail("ladder strides must be positive".into());
        }
        if self.ladder.last().map(|s| s.width) != Some(Width::Channels) {
            return fail("last ladder stage must output the audio channels".into());
        }
        if self.ladder.iter().any(|s| matches!(s.width, Width::TimesD(0))) {
            return fail("ladder widths must be positive".into());
        }
        if self.sample_rate_hz == 0 {
            return fail("sample rate must be positive".into());
        }
        Ok(())
    }

    /// Flat numeric encoding stored alongside checkpoints.
    pub fn to_tensor(&self) -> Tensor<f32> {
        let mut v = vec![
            self.d as f32,
            self.channels as f32,
            self.latent_dim as f32,
            self.base_len as f32,
            self.base_width as f32,
            self.kernel_len as f32,
            self.phase_shuffle as f32,
            (self.leaky_slope * 1e6).round() as f32,
            self.sample_rate_hz as f32,
            self.ladder.len() as f32,
        ];
        for s in &self.ladder {
            v.push(s.stride as f32);
            v.push(match s.width {
                Width::TimesD(m) => m as f32,
                Width::Channels => 0.0,
            });
        }
        let n = v.len();
        Tensor::new(vec![n], v).expect("flat")
    }

    pub fn from_tensor(t: &Tensor<f32>) -> Result<Self> {
        let v = t.data();
        let bad = || Error::Checkpoint("malformed architecture entry".into());
        if v.len() < 10 || v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(bad());
        }
        let u = |i: usize| v[i] as usize;
        let n = u(9);
        if v.len() != 10 + 2 * n {
            return Err(bad());
        }
        let ladder = (0..n)
            .map(|i| LadderStep {
                stride: u(10 + 2 * i),
                width: match u(11 + 2 * i) {
                    0 => Width::Channels,
                    m => Width::TimesD(m),
                },
            })
            .collect();
        let cfg = Self {
            d: u(0),
            channels: u(1),
            latent_dim: u(2),
            base_len: u(3),
            base_width: u(4),
            kernel_len: u(5),
            phase_shuffle: u(6),
            leaky_slope: v[7] as f64 / 1e6,
            sample_rate_hz: v[8] as u32,
            ladder,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn generator_specs(&self) -> Vec<LayerSpec> {
        let widths = self.widths();
        let mut specs = vec![
            LayerSpec::Dense {
                units: self.base_len * widths[0],
                max_norm: None,
            },
            LayerSpec::Reshape {
                shape: vec![self.base_len, widths[0]],
            },
        ];
        for (s, &w) in self.ladder.iter().zip(&widths[1..]) {
            specs.push(LayerSpec::Relu);
            specs.push(LayerSpec::TConv1d {
                filters: w,
                kernel: self.kernel_len,
                stride: s.stride,
            });
        }
        specs.push(LayerSpec::Tanh);
        specs
    }

    pub fn critic_specs(&self) -> Vec<LayerSpec> {
        let widths = self.widths();
        let mut specs = Vec::new();
        for (k, s) in self.ladder.iter().enumerate().rev() {
            specs.push(LayerSpec::Conv1d {
                filters: widths[k],
                kernel: self.kernel_len,
                stride: s.stride,
            });
            specs.push(LayerSpec::LeakyRelu { slope: self.leaky_slope });
            specs.push(LayerSpec::PhaseShuffle { n: self.phase_shuffle });
        }
        specs.push(LayerSpec::Reshape {
            shape: vec![self.base_len * widths[0]],
        });
        specs.push(LayerSpec::Dense {
            units: 1,
            max_norm: None,
        });
        specs
    }
}

/// Latent → waveform network: dense, reshape, `[ReLU → up-conv]` per ladder stage, tanh.
pub fn build_generator<T: Scalar, R: Rng + ?Sized>(cfg: &ArchConfig, rng: &mut R) -> Result<Network<T>> {
    cfg.validate()?;
    Network::build(&[cfg.latent_dim], cfg.generator_specs(), rng)
}

/// Waveform → unbounded score: `[conv → leaky ReLU → phase shuffle]` per stage, reshape, dense.
pub fn build_critic<T: Scalar, R: Rng + ?Sized>(cfg: &ArchConfig, rng: &mut R) -> Result<Network<T>> {
    cfg.validate()?;
    Network::build(&[cfg.output_len(), cfg.channels], cfg.critic_specs(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn output_lengths() {
        assert_eq!(ArchConfig::paper().output_len(), 196_608);
        assert_eq!(ArchConfig::desk().output_len(), 768);
    }

    #[test]
    fn desk_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = ArchConfig::desk();
        let g = build_generator::<f32, _>(&cfg, &mut rng).unwrap();
        assert_eq!(g.output_shape(), &[768, 1]);
        let c = build_critic::<f32, _>(&cfg, &mut rng).unwrap();
        assert_eq!(c.output_shape(), &[1]);
    }

    #[test]
    fn arch_round_trips_through_tensor() {
        for cfg in [ArchConfig::paper(), ArchConfig::desk()] {
            assert_eq!(ArchConfig::from_tensor(&cfg.to_tensor()).unwrap(), cfg);
        }
    }

    #[test]
    fn invalid_ladders_are_rejected() {
        let mut cfg = ArchConfig::desk();
        cfg.ladder.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ArchConfig::desk();
        cfg.ladder.push(LadderStep { stride: 2, width: Width::TimesD(1) });
        assert!(cfg.validate().is_err());
    }
}
