//! Central-difference gradient checking.

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares `grad(params)` against central differences of `value` and
/// returns the worst relative error over every parameter entry.
pub fn check_gradients<V, G>(mut value: V, mut grad: G, params: &[Tensor], eps: f64) -> Result<f64>
where
    V: FnMut(&[Tensor]) -> Result<f64>,
    G: FnMut(&[Tensor]) -> Result<Vec<Tensor>>,
{
    if !(eps > 0.0) {
        return Err(Error::Config(format!("finite-difference eps must be > 0, got {eps}")));
    }
    let analytic = grad(params)?;
    let mut work = params.to_vec();
    let mut worst: f64 = 0.0;
    for p in 0..params.len() {
        for j in 0..params[p].len() {
            let orig = params[p].data()[j];
            work[p].data_mut()[j] = orig + eps;
            let plus = value(&work)?;
            work[p].data_mut()[j] = orig - eps;
            let minus = value(&work)?;
            work[p].data_mut()[j] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!("objective at parameter {p}[{j}]")));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(analytic[p].data()[j], numeric));
        }
    }
    Ok(worst)
}

/// Gradient check for a function recorded on a tape. `f` receives one
/// differentiable leaf per entry of `params` and returns a scalar.
pub fn finite_difference_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let value = |ps: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars = ps
            .iter()
            .map(|p| tape.constant(p.clone()))
            .collect::<Result<Vec<_>>>()?;
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };
    let grad = |ps: &[Tensor]| -> Result<Vec<Tensor>> {
        let mut tape = Tape::new();
        let vars = ps
            .iter()
            .map(|p| tape.param(p.clone()))
            .collect::<Result<Vec<_>>>()?;
        let out = f(&mut tape, &vars)?;
        if !tape.value(out).all_finite() {
            return Err(Error::NonFinite("objective".into()));
        }
        let mut g = tape.backward(out)?;
        Ok(vars.iter().map(|&v| g.take(v).expect("leaf gradient")).collect())
    };
    check_gradients(value, grad, params, eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_has_near_zero_error() {
        let err = finite_difference_check(
            |tape, v| tape.mul(v[0], v[0]),
            &[Tensor::scalar(3.0)],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn doubled_gradient_is_flagged_at_one_third() {
        let value = |p: &[Tensor]| Ok(p[0].item() * p[0].item());
        let wrong = |p: &[Tensor]| Ok(vec![Tensor::scalar(2.0 * 2.0 * p[0].item())]);
        let err = check_gradients(value, wrong, &[Tensor::scalar(3.0)], 1e-5).unwrap();
        assert!((err - 1.0 / 3.0).abs() < 1e-6, "{err}");
        assert!(err > 1e-4);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let value = |p: &[Tensor]| Ok(1.0 / (p[0].item() - p[0].item()));
        let grad = |_: &[Tensor]| Ok(vec![Tensor::scalar(0.0)]);
        assert!(matches!(
            check_gradients(value, grad, &[Tensor::scalar(1.0)], 1e-5),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn rejects_non_positive_eps() {
        assert!(finite_difference_check(|t, v| t.sum(v[0]), &[Tensor::scalar(1.0)], 0.0).is_err());
    }
}
