use ndarray::Array2;

use super::{CostMatrix, TransportPlan};
use crate::error::{Error, Result};

const MARGINAL_TOL: f64 = 1e-8;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Entropy-regularized transport between uniform marginals, with log-domain
/// updates of the dual potentials.
///
/// Stops once every row sum is within `1e-8` of `1/N` (column sums are exact
/// after each column update); otherwise fails after `max_iter` sweeps.
pub fn sinkhorn(cost: &CostMatrix, epsilon: f64, max_iter: usize) -> Result<TransportPlan> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let c = cost.values();
    let (m, n) = c.dim();
    if m == 0 || n == 0 {
        return Err(Error::Empty("cost matrix"));
    }
    let log_a = -(m as f64).ln();
    let log_b = -(n as f64).ln();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];

    for _ in 0..max_iter {
        for j in 0..m {
            f[j] = epsilon * (log_a - log_sum_exp((0..n).map(|k| (g[k] - c[[j, k]]) / epsilon)));
        }
        for k in 0..n {
            g[k] = epsilon * (log_b - log_sum_exp((0..m).map(|j| (f[j] - c[[j, k]]) / epsilon)));
        }
        let row_error = (0..m)
            .map(|j| {
                let s: f64 = (0..n).map(|k| ((f[j] + g[k] - c[[j, k]]) / epsilon).exp()).sum();
                (s - 1.0 / m as f64).abs()
            })
            .fold(0.0, f64::max);
        if row_error < MARGINAL_TOL {
            let mass = Array2::from_shape_fn((m, n), |(j, k)| ((f[j] + g[k] - c[[j, k]]) / epsilon).exp());
            return Ok(TransportPlan::from_mass(mass, cost));
        }
    }
    Err(Error::NotConverged(max_iter))
}
