//! Central finite-difference verification of stored gradients.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::store::ParameterStore;

/// Worst disagreement found within one named parameter.
#[derive(Debug, Clone)]
pub struct ParamCheck<T> {
    pub name: String,
    /// Max over the parameter's scalars of
    /// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_rel_err: T,
    /// Flat index where the maximum occurred.
    pub worst_index: usize,
    pub analytic: T,
    pub numeric: T,
}

/// Per-parameter report of a finite-difference sweep.
#[derive(Debug, Clone)]
pub struct GradCheckReport<T> {
    pub step: T,
    pub tol: T,
    pub params: Vec<ParamCheck<T>>,
}

impl<T: Scalar> GradCheckReport<T> {
    pub fn max_rel_err(&self) -> T {
        self.params
            .iter()
            .fold(T::zero(), |acc, p| acc.max(p.max_rel_err))
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_err <= self.tol)
    }

    /// Parameters whose worst relative error exceeds the tolerance.
    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck<T>> {
        self.params.iter().filter(|p| p.max_rel_err > self.tol)
    }
}

impl<T: Scalar> fmt::Display for GradCheckReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.params {
            let verdict = if p.max_rel_err <= self.tol { "ok" } else { "FAIL" };
            writeln!(
                f,
                "{:<18} max rel err {:>12.3e} at [{}] (analytic {:.6e}, numeric {:.6e}) {}",
                p.name, p.max_rel_err, p.worst_index, p.analytic, p.numeric, verdict
            )?;
        }
        writeln!(
            f,
            "worst over all parameters: {:.3e} (tol {:.1e})",
            self.max_rel_err(),
            self.tol
        )
    }
}

/// Compares the gradients currently held in `store` against central finite
/// differences of `loss_fn`, parameter by parameter.
///
/// The caller populates the analytic gradients first (one forward/backward
/// pass); `loss_fn` must be deterministic for fixed parameter values. Every
/// scalar slot is probed at `value ± step`; a non-finite probe loss aborts
/// with a numeric error naming the parameter.
pub fn finite_diff_check<T, F>(
    mut loss_fn: F,
    store: &mut ParameterStore<T>,
    step: T,
    tol: T,
) -> Result<GradCheckReport<T>>
where
    T: Scalar,
    F: FnMut(&ParameterStore<T>) -> Result<T>,
{
    let names: Vec<String> = store.names().map(str::to_string).collect();
    let floor = T::lit(1e-8);
    let two = T::lit(2.0);
    let mut params = Vec::with_capacity(names.len());

    for name in names {
        let analytic_grad = store.gradient(&name)?.as_slice().to_vec();
        let mut check = ParamCheck {
            name: name.clone(),
            max_rel_err: T::zero(),
            worst_index: 0,
            analytic: T::zero(),
            numeric: T::zero(),
        };
        for (index, &analytic) in analytic_grad.iter().enumerate() {
            let original = store.scalar_at(&name, index)?;
            store.set_scalar_at(&name, index, original + step)?;
            let plus = loss_fn(store)?;
            store.set_scalar_at(&name, index, original - step)?;
            let minus = loss_fn(store)?;
            store.set_scalar_at(&name, index, original)?;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss while probing {name}[{index}] (loss+ {plus}, loss- {minus})"
                )));
            }
            let numeric = (plus - minus) / (two * step);
            let denom = analytic.abs().max(numeric.abs()).max(floor);
            let rel = (analytic - numeric).abs() / denom;
            if rel > check.max_rel_err {
                check.max_rel_err = rel;
                check.worst_index = index;
                check.analytic = analytic;
                check.numeric = numeric;
            }
        }
        params.push(check);
    }

    Ok(GradCheckReport { step, tol, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::Tape;
    use crate::tensor::Vector;

    fn quadratic_loss(store: &ParameterStore<f64>) -> Result<f64> {
        // sum of squares over every parameter scalar
        let mut total = 0.0;
        for name in store.names() {
            for &v in store.value(name)?.as_slice() {
                total += v * v;
            }
        }
        Ok(total)
    }

    fn quadratic_store() -> ParameterStore<f64> {
        let mut store = ParameterStore::new();
        store
            .insert_vector("theta", Vector::from_vec(vec![0.4, -1.3, 2.2]).unwrap())
            .unwrap();
        store
            .insert_vector("phi", Vector::from_vec(vec![0.05]).unwrap())
            .unwrap();
        store
    }

    #[test]
    fn quadratic_passes_tight_tolerance() {
        let mut store = quadratic_store();
        // Analytic gradient of sum theta^2 is 2 theta; fill via tape.
        let mut tape = Tape::new();
        let theta = tape.param(&store, "theta").unwrap();
        let phi = tape.param(&store, "phi").unwrap();
        let a = tape.dot(theta, theta).unwrap();
        let b = tape.dot(phi, phi).unwrap();
        let loss = tape.add(a, b).unwrap();
        tape.backward(loss, &mut store).unwrap();

        let report = finite_diff_check(quadratic_loss, &mut store, 1e-5, 1e-6).unwrap();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn deliberately_scaled_gradient_fails_with_half_error() {
        let mut store = quadratic_store();
        // Store 2x the true gradient by accumulating it twice over.
        for name in ["theta", "phi"] {
            let doubled: Vec<f64> = store
                .value(name)
                .unwrap()
                .as_slice()
                .iter()
                .map(|v| 4.0 * v) // true grad is 2v; 4v is scaled by 2
                .collect();
            store.accumulate_gradient(name, &doubled).unwrap();
        }
        let report = finite_diff_check(quadratic_loss, &mut store, 1e-5, 1e-6).unwrap();
        assert!(!report.passed());
        for p in &report.params {
            assert!(
                (p.max_rel_err - 0.5).abs() < 1e-3,
                "expected rel err near 1/2, got {} for {}",
                p.max_rel_err,
                p.name
            );
        }
    }

    #[test]
    fn parameters_are_restored_after_probing() {
        let mut store = quadratic_store();
        let before: Vec<f64> = store.value("theta").unwrap().as_slice().to_vec();
        finite_diff_check(quadratic_loss, &mut store, 1e-5, 1e-6).unwrap();
        let after: Vec<f64> = store.value("theta").unwrap().as_slice().to_vec();
        for (a, b) in before.iter().zip(&after) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn non_finite_probe_names_parameter() {
        let mut store = quadratic_store();
        let loss = |store: &ParameterStore<f64>| -> Result<f64> {
            let v = store.value("theta")?.as_slice()[0];
            Ok(1.0 / (v - store.value("theta")?.as_slice()[0])) // always inf
        };
        let err = finite_diff_check(loss, &mut store, 1e-5, 1e-6).unwrap_err();
        match err {
            Error::Numeric(msg) => assert!(msg.contains("theta[0]"), "{msg}"),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }
}
