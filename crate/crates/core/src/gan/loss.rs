//! WGAN-GP objectives and the original minimax value as a diagnostic.

use rand::Rng;

use crate::autodiff::{Graph, Mode, Module, NodeId, Scalar, Tensor};
use crate::error::{Error, Result};

/// Mean over the batch of `(‖∇ critic(x̂)‖₂ − 1)²` at the interpolates
/// `x̂ = ε·real + (1−ε)·fake`, one `ε` per sample. Unscaled by λ.
pub fn gradient_penalty<T: Scalar>(
    g: &mut Graph<T>,
    critic: &dyn Module<T>,
    x_real: &Tensor<T>,
    x_fake: &Tensor<T>,
    mode: &mut Mode<'_>,
) -> Result<NodeId> {
    let b = x_real.shape().first().copied().unwrap_or(0);
    let eps: Vec<T> = (0..b).map(|_| T::from_f64_lossy(mode.rng.gen::<f64>())).collect();
    gradient_penalty_with_eps(g, critic, x_real, x_fake, &eps, mode)
}

pub fn gradient_penalty_with_eps<T: Scalar>(
    g: &mut Graph<T>,
    critic: &dyn Module<T>,
    x_real: &Tensor<T>,
    x_fake: &Tensor<T>,
    eps: &[T],
    mode: &mut Mode<'_>,
) -> Result<NodeId> {
    if x_real.shape() != x_fake.shape() {
        return Err(Error::Dimension(format!(
            "real batch {:?} and fake batch {:?} differ",
            x_real.shape(),
            x_fake.shape()
        )));
    }
    let shape = x_real.shape().to_vec();
    let b = *shape.first().ok_or_else(|| Error::Dimension("empty batch shape".into()))?;
    if eps.len() != b || b == 0 {
        return Err(Error::Dimension(format!("need one interpolation weight per sample ({b})")));
    }
    let per = x_real.len() / b;
    let mixed: Vec<T> = x_real
        .data()
        .iter()
        .zip(x_fake.data())
        .enumerate()
        .map(|(i, (&r, &f))| {
            let e = eps[i / per];
            e * r + (T::one() - e) * f
        })
        .collect();
    let x_hat = g.leaf(Tensor::new(shape, mixed)?);
    let score = critic.forward(g, x_hat, mode)?;
    let total = g.sum_all(score);
    let Some(grad) = g.grad(total, &[x_hat])?[0] else {
        // Critic ignores its input: every gradient norm is 0.
        return Ok(g.constant(Tensor::scalar(T::one())));
    };
    let sq = g.square(grad);
    let rows = g.reshape(sq, &[b, per])?;
    let norm_sq = g.sum_last(rows)?;
    let norm = g.sqrt(norm_sq);
    let dev = g.add_scalar(norm, -T::one());
    let dev_sq = g.square(dev);
    Ok(g.mean_all(dev_sq))
}

/// Components of the critic objective, all recorded on the same graph.
#[derive(Debug, Clone, Copy)]
pub struct CriticLoss {
    /// `mean(critic(fake)) − mean(critic(real)) + λ·penalty`
    pub loss: NodeId,
    pub real_mean: f64,
    pub fake_mean: f64,
    pub penalty: f64,
}

impl CriticLoss {
    /// Wasserstein distance estimate `mean(critic(real)) − mean(critic(fake))`.
    pub fn wasserstein(&self) -> f64 {
        self.real_mean - self.fake_mean
    }
}

/// Critic objective for a batch of real clips and generator samples.
pub fn critic_loss<T: Scalar>(
    g: &mut Graph<T>,
    critic: &dyn Module<T>,
    x_real: &Tensor<T>,
    x_fake: &Tensor<T>,
    lambda_gp: f64,
    mode: &mut Mode<'_>,
) -> Result<CriticLoss> {
    let real = g.constant(x_real.clone());
    let fake = g.constant(x_fake.clone());
    let s_real = critic.forward(g, real, mode)?;
    let s_fake = critic.forward(g, fake, mode)?;
    let m_real = g.mean_all(s_real);
    let m_fake = g.mean_all(s_fake);
    let diff = g.sub(m_fake, m_real)?;
    let gp = gradient_penalty(g, critic, x_real, x_fake, mode)?;
    let scaled = g.scale(gp, T::from_f64_lossy(lambda_gp));
    let loss = g.add(diff, scaled)?;
    let f = |g: &Graph<T>, n: NodeId| g.value(n).item().to_f64().unwrap_or(f64::NAN);
    Ok(CriticLoss {
        loss,
        real_mean: f(g, m_real),
        fake_mean: f(g, m_fake),
        penalty: f(g, gp),
    })
}

/// Generator objective `−mean(critic(G(z)))`.
pub fn generator_loss<T: Scalar>(
    g: &mut Graph<T>,
    critic: &dyn Module<T>,
    generator: &dyn Module<T>,
    z: &Tensor<T>,
    mode: &mut Mode<'_>,
) -> Result<NodeId> {
    let z = g.constant(z.clone());
    let fake = generator.forward(g, z, mode)?;
    let score = critic.forward(g, fake, mode)?;
    let m = g.mean_all(score);
    Ok(g.scale(m, -T::one()))
}

pub const PROBABILITY_FLOOR: f64 = 1e-7;

/// `mean(ln D(real)) + mean(ln(1 − D(fake)))` with probabilities clamped
/// into `[1e-7, 1 − 1e-7]`.
pub fn minimax_value(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(Error::Empty("minimax value needs real and fake probabilities".into()));
    }
    let clamp = |p: f64| p.clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR);
    let real = d_real.iter().map(|&p| clamp(p).ln()).sum::<f64>() / d_real.len() as f64;
    let fake = d_fake.iter().map(|&p| (1.0 - clamp(p)).ln()).sum::<f64>() / d_fake.len() as f64;
    Ok(real + fake)
}

/// Minimax value with `D = sigmoid(critic)` evaluated on real clips and
/// generator samples.
pub fn minimax_value_estimate<T: Scalar>(
    critic: &dyn Module<T>,
    generator: &dyn Module<T>,
    x_real: &Tensor<T>,
    z: &Tensor<T>,
    mode: &mut Mode<'_>,
) -> Result<f64> {
    let mut g = Graph::new();
    let real = g.constant(x_real.clone());
    let zn = g.constant(z.clone());
    let fake = generator.forward(&mut g, zn, mode)?;
    let s_real = critic.forward(&mut g, real, mode)?;
    let s_fake = critic.forward(&mut g, fake, mode)?;
    let p_real = g.sigmoid(s_real);
    let p_fake = g.sigmoid(s_fake);
    let to64 = |t: &Tensor<T>| t.data().iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect::<Vec<_>>();
    minimax_value(&to64(g.value(p_real)), &to64(g.value(p_fake)))
}
