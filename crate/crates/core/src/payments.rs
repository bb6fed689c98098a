//! Payments: inverting virtual thresholds, and the integral form used to
//! cross-check them.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::model::ValuationModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismOutcome {
    pub xi: Vec<bool>,
    pub g: Vec<u64>,
    pub t: Vec<f64>,
    /// Valuation at which each consumer's virtual valuation meets its
    /// threshold; `None` if no valuation in the reported level's support does.
    pub theta_thresholds: Vec<Option<f64>>,
    pub vthr: Vec<f64>,
    /// `sum t - sum p g`.
    pub seller_profit: f64,
    /// `sum xi w - sum p g`.
    pub virtual_surplus: f64,
}

/// Threshold valuations and payments. Served consumers pay
/// `w^{-1}(vthr_l, c_l)`, everyone else pays nothing.
pub fn threshold_payment(
    vthr: &[f64],
    models: &[ValuationModel],
    c: &[usize],
    xi: &[bool],
) -> Result<(Vec<f64>, Vec<Option<f64>>)> {
    let n = vthr.len();
    if models.len() != n || c.len() != n || xi.len() != n {
        return Err(validation(format!(
            "payment inputs disagree on length: {n} thresholds, {} models, {} levels, {} allocations",
            models.len(),
            c.len(),
            xi.len()
        )));
    }
    let mut t = Vec::with_capacity(n);
    let mut thetas = Vec::with_capacity(n);
    for l in 0..n {
        if vthr[l].is_nan() || vthr[l] < 0.0 {
            return Err(validation(format!(
                "virtual threshold {} of consumer {l} is negative",
                vthr[l]
            )));
        }
        let theta = models[l].inverse_virtual_valuation(vthr[l], c[l])?;
        match (xi[l], theta) {
            (true, Some(x)) => t.push(x),
            (true, None) => {
                return Err(Error::InconsistentTrace(format!(
                    "consumer {l} is served but threshold {} exceeds every virtual valuation at level {}",
                    vthr[l], c[l]
                )))
            }
            (false, _) => t.push(0.0),
        }
        thetas.push(theta);
    }
    Ok((t, thetas))
}

/// `theta * xi(theta) - int_lo^theta xi(s) ds` for an allocation rule that
/// must be a non-decreasing step in the own report `s` on `[lo, hi]`.
///
/// `served_at` is probed on a `quad_points` lattice over `[lo, theta]` to
/// check monotonicity, then the jump is located by bisection.
pub fn integral_payment<F>(
    theta: f64,
    support: (f64, f64),
    mut served_at: F,
    quad_points: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<bool>,
{
    let (lo, hi) = support;
    if !(theta >= lo && theta <= hi) {
        return Err(validation(format!("theta {theta} outside [{lo}, {hi}]")));
    }
    if quad_points < 2 {
        return Err(validation(
            "integral payment needs at least two lattice points",
        ));
    }

    let lattice: Vec<f64> = (0..quad_points)
        .map(|i| {
            if i + 1 == quad_points {
                theta
            } else {
                lo + (theta - lo) * i as f64 / (quad_points - 1) as f64
            }
        })
        .collect();
    let mut first_served: Option<usize> = None;
    for (i, &s) in lattice.iter().enumerate() {
        let served = served_at(s)?;
        match (first_served, served) {
            (None, true) => first_served = Some(i),
            (Some(j), false) => {
                return Err(Error::MonotonicityViolation(format!(
                    "served at {} but not at {s}",
                    lattice[j]
                )))
            }
            _ => {}
        }
    }

    let Some(j) = first_served else {
        return Ok(0.0);
    };
    if j == 0 {
        // served on all of [lo, theta]
        return Ok(lo);
    }

    let (mut a, mut b) = (lattice[j - 1], lattice[j]);
    let tol = 1e-12 * hi.abs().max(1.0);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        if served_at(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    let jump = b;
    Ok(theta - (theta - jump).max(0.0))
}
