//! Finite-difference gradient checking in double precision.

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Denominator floor of the relative error, so gradients that are zero up
/// to rounding do not inflate it.
pub const REL_ERR_FLOOR: f64 = 1e-3;

/// `|a − n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Largest relative error between the graph gradient of the scalar `f` and
/// central differences with step `h`, over every element of every input.
pub fn gradient_check<F>(inputs: &[Tensor<f64>], h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[NodeId]) -> Result<NodeId>,
{
    let eval = |xs: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = xs.iter().map(|x| g.constant(x.clone())).collect();
        let y = f(&mut g, &ids)?;
        Ok(g.value(y).item())
    };
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|x| g.leaf(x.clone())).collect();
    let y = f(&mut g, &ids)?;
    if g.value(y).len() != 1 {
        return Err(Error::Dimension("gradient check needs a scalar output".into()));
    }
    let grads = g.grad(y, &ids)?;
    let mut worst = 0.0f64;
    let mut xs = inputs.to_vec();
    for (i, grad) in grads.iter().enumerate() {
        let analytic: Vec<f64> = match grad {
            Some(n) => g.value(*n).data().to_vec(),
            None => vec![0.0; inputs[i].len()],
        };
        for j in 0..inputs[i].len() {
            let orig = xs[i].data()[j];
            xs[i].data_mut()[j] = orig + h;
            let up = eval(&xs)?;
            xs[i].data_mut()[j] = orig - h;
            let down = eval(&xs)?;
            xs[i].data_mut()[j] = orig;
            worst = worst.max(relative_error(analytic[j], (up - down) / (2.0 * h)));
        }
    }
    Ok(worst)
}
