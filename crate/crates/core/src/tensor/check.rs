use super::array::Array;
use super::graph::{Graph, NodeId};
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of `builder` against central finite
/// differences with the given `step`.
///
/// Returns `max_i |analytic_i - numeric_i| / max(1, |numeric_i|)`.
pub fn grad_check<F>(builder: F, input: &Array, step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let eval = |x: Array| -> Result<f64> {
        let mut g = Graph::new();
        let leaf = g.input(x);
        let root = builder(&mut g, leaf)?;
        Ok(g.value(root).item())
    };

    let mut g = Graph::new();
    let leaf = g.input(input.clone());
    let root = builder(&mut g, leaf)?;
    let grads = g.backward(root)?;
    let analytic = grads.get(leaf).cloned().unwrap_or_else(|| Array::zeros(input.shape()));

    let mut worst: f64 = 0.0;
    for i in 0..input.len() {
        let mut plus = input.clone();
        plus.data_mut()[i] += step;
        let mut minus = input.clone();
        minus.data_mut()[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        let err = (analytic.data()[i] - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares() {
        let x = Array::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let err = grad_check(
            |g, x| {
                let sq = g.mul(x, x)?;
                g.reduce_sum(sq, 0)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn constant_builder_is_exact() {
        let x = Array::new(vec![2], vec![0.5, -1.0]).unwrap();
        let err = grad_check(|g, _| Ok(g.constant(Array::scalar(4.0))), &x, 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn rejects_bad_step() {
        let x = Array::scalar(1.0);
        assert!(grad_check(|_, x| Ok(x), &x, 0.0).is_err());
    }
}
