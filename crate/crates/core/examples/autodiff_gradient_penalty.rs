// Second-order differentiation through the engine: the gradient penalty of
// a tiny convolutional critic, and its parameter gradient checked against
// finite differences.

use envgan::autodiff::{Graph, LayerSpec, Mode, Network, Tensor};
use envgan::gan::gradient_penalty_with_eps;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> envgan::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut critic = Network::<f64>::build(
        &[8, 1],
        vec![
            LayerSpec::Conv1d { filters: 2, kernel: 3, stride: 2 },
            LayerSpec::LeakyRelu { slope: 0.2 },
            LayerSpec::Reshape { shape: vec![8] },
            LayerSpec::Dense { units: 1, max_norm: None },
        ],
        &mut rng,
    )?;
    let real = Tensor::from_fn(&[2, 8, 1], |_| rng.gen_range(-1.0..1.0));
    let fake = Tensor::from_fn(&[2, 8, 1], |_| rng.gen_range(-1.0..1.0));
    let eps = [0.3, 0.8];

    let penalty = |net: &Network<f64>, rng: &mut ChaCha8Rng| -> envgan::Result<f64> {
        let mut g = Graph::new();
        let p = gradient_penalty_with_eps(&mut g, net, &real, &fake, &eps, &mut Mode::eval(rng))?;
        Ok(g.value(p).item())
    };

    let mut g = Graph::new();
    let p = gradient_penalty_with_eps(&mut g, &critic, &real, &fake, &eps, &mut Mode::eval(&mut rng))?;
    println!("penalty {:.6}", g.value(p).item());
    g.backward(p, critic.params_mut())?;

    let h = 1e-5;
    let mut worst = 0.0f64;
    let ids: Vec<_> = critic.params().ids().collect();
    for id in ids {
        let analytic = critic.params().grad(id).clone();
        for j in 0..analytic.len() {
            let orig = critic.params().value(id).data()[j];
            critic.params_mut().value_mut(id).data_mut()[j] = orig + h;
            let up = penalty(&critic, &mut rng)?;
            critic.params_mut().value_mut(id).data_mut()[j] = orig - h;
            let down = penalty(&critic, &mut rng)?;
            critic.params_mut().value_mut(id).data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.data()[j];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3));
        }
        println!("{:>16}: {} values", critic.params().name(id), analytic.len());
    }
    println!("max relative error of d(penalty)/d(params): {worst:.2e}");
    Ok(())
}
