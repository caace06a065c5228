use ndarray::{Array1, Axis};

use super::{CostMatrix, TransportPlan};
use crate::error::{Error, Result};

/// Dual certificate for a transport plan.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub passed: bool,
    /// Largest of `alpha_j + beta_k - cost_jk` over all cells and
    /// `|alpha_j + beta_k - cost_jk|` over the support.
    pub max_violation: f64,
    /// Largest deviation of a row or column sum from its uniform marginal.
    pub marginal_error: f64,
    pub row_potentials: Array1<f64>,
    pub col_potentials: Array1<f64>,
}

/// Checks complementary slackness for `plan` against `cost`.
///
/// Potentials are read off the support forest (`alpha_j + beta_k = cost_jk`
/// on positive cells). When the support does not span all rows and columns,
/// each component's potentials may be shifted by a constant; those shifts are
/// chosen by a Bellman-Ford pass over the inter-component constraints, so an
/// optimal degenerate plan still certifies.
pub fn verify_optimality(cost: &CostMatrix, plan: &TransportPlan, tol: f64) -> Result<Certificate> {
    let c = cost.values();
    let (m, n) = c.dim();
    if plan.mass.dim() != (m, n) {
        return Err(Error::DimensionMismatch {
            expected: m * n,
            got: plan.mass.len(),
        });
    }
    if m == 0 || n == 0 {
        return Err(Error::Empty("cost matrix"));
    }
    let mass = &plan.mass;

    // Nodes: rows 0..m, columns m..m+n.
    let mut adj = vec![Vec::new(); m + n];
    for ((j, k), &x) in mass.indexed_iter() {
        if x > 0.0 {
            adj[j].push(m + k);
            adj[m + k].push(j);
        }
    }
    let mut pot = vec![0.0; m + n];
    let mut comp = vec![usize::MAX; m + n];
    let mut num_comps = 0;
    for root in 0..m + n {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = num_comps;
        let mut stack = vec![root];
        while let Some(a) = stack.pop() {
            for &b in &adj[a] {
                if comp[b] == usize::MAX {
                    comp[b] = num_comps;
                    let (j, k) = if a < m { (a, b - m) } else { (b, a - m) };
                    pot[b] = c[[j, k]] - pot[a];
                    stack.push(b);
                }
            }
        }
        num_comps += 1;
    }

    if num_comps > 1 {
        // w[b][a]: tightest bound on shift[a] - shift[b].
        let mut w = vec![vec![f64::INFINITY; num_comps]; num_comps];
        for j in 0..m {
            for k in 0..n {
                let (a, b) = (comp[j], comp[m + k]);
                if a != b {
                    let slack = c[[j, k]] - pot[j] - pot[m + k];
                    if slack < w[b][a] {
                        w[b][a] = slack;
                    }
                }
            }
        }
        let mut shift = vec![0.0; num_comps];
        for _ in 0..num_comps {
            let mut changed = false;
            for b in 0..num_comps {
                for a in 0..num_comps {
                    let bound = shift[b] + w[b][a];
                    if bound < shift[a] {
                        shift[a] = bound;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for j in 0..m {
            pot[j] += shift[comp[j]];
        }
        for k in 0..n {
            pot[m + k] -= shift[comp[m + k]];
        }
    }

    let mut max_violation = 0.0f64;
    for ((j, k), &x) in mass.indexed_iter() {
        let gap = pot[j] + pot[m + k] - c[[j, k]];
        let v = if x > 0.0 { gap.abs() } else { gap };
        max_violation = max_violation.max(v);
    }

    let mut marginal_error = 0.0f64;
    for s in mass.sum_axis(Axis(1)) {
        marginal_error = marginal_error.max((s - 1.0 / m as f64).abs());
    }
    for s in mass.sum_axis(Axis(0)) {
        marginal_error = marginal_error.max((s - 1.0 / n as f64).abs());
    }

    Ok(Certificate {
        passed: max_violation <= tol,
        max_violation,
        marginal_error,
        row_potentials: Array1::from_iter(pot[..m].iter().copied()),
        col_potentials: Array1::from_iter(pot[m..].iter().copied()),
    })
}
