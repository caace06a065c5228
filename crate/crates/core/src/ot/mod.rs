//! Exact optimal transport between uniform empirical measures.
//!
//! Plans store probability mass: rows of an `N x N_i` plan sum to `1/N` and
//! columns to `1/N_i`.

mod certificate;
mod simplex;
mod sinkhorn;

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub use certificate::{verify_optimality, Certificate};
pub use sinkhorn::sinkhorn;

/// Squared Euclidean costs between two point clouds.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(Array2<f64>);

impl CostMatrix {
    /// Wraps raw costs after checking they are finite and nonnegative.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("cost matrix"));
        }
        if let Some(&c) = values.iter().find(|&&c| c < 0.0) {
            return Err(Error::InvalidArgument(format!("negative cost {c}")));
        }
        Ok(CostMatrix(values))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub mass: Array2<f64>,
    pub objective: f64,
}

impl TransportPlan {
    /// Builds a plan from mass entries, computing its objective.
    pub fn from_mass(mass: Array2<f64>, cost: &CostMatrix) -> Self {
        let objective = (&mass * cost.values()).sum();
        TransportPlan { mass, objective }
    }

    pub fn support_size(&self) -> usize {
        self.mass.iter().filter(|&&x| x > 0.0).count()
    }
}

/// `values[j][k] = ||a_j - b_k||^2`.
pub fn squared_cost(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<CostMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    let mut values = Array2::zeros((a.nrows(), b.nrows()));
    for (j, x) in a.outer_iter().enumerate() {
        for (k, y) in b.outer_iter().enumerate() {
            values[[j, k]] = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
        }
    }
    CostMatrix::new(values)
}

/// Minimum-cost coupling of the uniform measures on the rows and columns.
pub fn solve_ot(cost: &CostMatrix) -> Result<TransportPlan> {
    let (m, n) = cost.dim();
    if m == 0 || n == 0 {
        return Err(Error::Empty("cost matrix"));
    }
    let solution = simplex::solve(cost.values())?;
    let total = (m * n) as f64;
    let mass = Array2::from_shape_fn((m, n), |(j, k)| solution.flow[j * n + k] as f64 / total);
    Ok(TransportPlan::from_mass(mass, cost))
}

/// 2-Wasserstein distance between the uniform empirical measures on the rows
/// of `a` and `b`.
pub fn wasserstein2(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    let plan = solve_ot(&squared_cost(a, b)?)?;
    Ok(plan.objective.max(0.0).sqrt())
}

/// Counts the linear programs solved through it.
#[derive(Debug, Default)]
pub struct OtSolver {
    solves: AtomicUsize,
}

impl OtSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&self, cost: &CostMatrix) -> Result<TransportPlan> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        solve_ot(cost)
    }

    pub fn wasserstein2(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
        let plan = self.solve(&squared_cost(a, b)?)?;
        Ok(plan.objective.max(0.0).sqrt())
    }

    pub fn solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use ndarray::{array, Axis};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_cloud(rng: &mut impl Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.gen_range(-2.0..2.0))
    }

    /// Minimum over all permutation matchings, `sum c[j][p(j)] / n`.
    pub(crate) fn permutation_oracle(cost: &Array2<f64>) -> f64 {
        fn rec(cost: &Array2<f64>, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            let n = cost.nrows();
            if row == n {
                *best = best.min(acc);
                return;
            }
            for c in 0..n {
                if !used[c] {
                    used[c] = true;
                    rec(cost, row + 1, used, acc + cost[[row, c]], best);
                    used[c] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.nrows()], 0.0, &mut best);
        best / cost.nrows() as f64
    }

    fn assert_marginals(plan: &TransportPlan) {
        let (m, n) = plan.mass.dim();
        for s in plan.mass.sum_axis(Axis(1)) {
            assert!((s - 1.0 / m as f64).abs() < 1e-12);
        }
        for s in plan.mass.sum_axis(Axis(0)) {
            assert!((s - 1.0 / n as f64).abs() < 1e-12);
        }
        assert!(plan.mass.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn squared_cost_basics() {
        let c = squared_cost(array![[0.0]].view(), array![[3.0]].view()).unwrap();
        assert_eq!(c.values(), &array![[9.0]]);
        let z = array![[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]];
        let c = squared_cost(z.view(), z.view()).unwrap();
        for j in 0..3 {
            assert_eq!(c.values()[[j, j]], 0.0);
        }
        assert!(squared_cost(z.view(), array![[1.0]].view()).is_err());
    }

    #[test]
    fn squared_cost_matches_elementwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_cloud(&mut rng, 4, 2);
        let b = random_cloud(&mut rng, 5, 2);
        let c = squared_cost(a.view(), b.view()).unwrap();
        let ct = squared_cost(b.view(), a.view()).unwrap();
        for j in 0..4 {
            for k in 0..5 {
                let dx = a[[j, 0]] - b[[k, 0]];
                let dy = a[[j, 1]] - b[[k, 1]];
                assert!((c.values()[[j, k]] - (dx * dx + dy * dy)).abs() < 1e-14);
                assert_eq!(c.values()[[j, k]], ct.values()[[k, j]]);
            }
        }
    }

    #[test]
    fn diagonal_matching() {
        let cost = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let plan = solve_ot(&cost).unwrap();
        assert_eq!(plan.mass, array![[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(plan.objective, 0.0);
    }

    #[test]
    fn single_row_is_forced() {
        let cost = CostMatrix::new(array![[1.0, 2.0, 6.0]]).unwrap();
        let plan = solve_ot(&cost).unwrap();
        for &x in &plan.mass {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((plan.objective - 3.0).abs() < 1e-14);
    }

    #[test]
    fn empty_and_non_finite_rejected() {
        let empty = CostMatrix::new(Array2::zeros((0, 3))).unwrap();
        assert!(matches!(solve_ot(&empty), Err(Error::Empty(_))));
        assert!(CostMatrix::new(array![[f64::NAN]]).is_err());
        assert!(CostMatrix::new(array![[f64::INFINITY]]).is_err());
    }

    #[test]
    fn random_6x6_matches_permutation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_cloud(&mut rng, 6, 3);
        let b = random_cloud(&mut rng, 6, 3);
        let cost = squared_cost(a.view(), b.view()).unwrap();
        let plan = solve_ot(&cost).unwrap();
        let oracle = permutation_oracle(cost.values());
        assert!((plan.objective - oracle).abs() <= 1e-12 * oracle.abs());
        assert_marginals(&plan);
    }

    #[test]
    fn vertex_support_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (m, n) = (rng.gen_range(1..15), rng.gen_range(1..15));
            let cost = squared_cost(random_cloud(&mut rng, m, 2).view(), random_cloud(&mut rng, n, 2).view()).unwrap();
            let plan = solve_ot(&cost).unwrap();
            assert!(plan.support_size() <= m + n - 1);
            assert_marginals(&plan);
        }
    }

    #[test]
    fn wasserstein_identity_and_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_cloud(&mut rng, 7, 2);
        assert_eq!(wasserstein2(a.view(), a.view()).unwrap(), 0.0);
        let t = array![0.3, -0.4];
        let b = &a + &t;
        assert!((wasserstein2(a.view(), b.view()).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let clouds: Vec<_> = (0..3).map(|_| random_cloud(&mut rng, 5, 2)).collect();
        let w = |i: usize, j: usize| wasserstein2(clouds[i].view(), clouds[j].view()).unwrap();
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            assert!(w(i, k) <= w(i, j) + w(j, k) + 1e-12);
        }
        assert!((w(0, 1) - w(1, 0)).abs() < 1e-12);
    }

    #[test]
    fn solver_counts_solves() {
        let solver = OtSolver::new();
        let a = array![[0.0], [1.0]];
        for _ in 0..3 {
            solver.wasserstein2(a.view(), a.view()).unwrap();
        }
        assert_eq!(solver.solves(), 3);
    }

    proptest! {
        #[test]
        fn objective_matches_oracle(seed in 0u64..10_000, n in 1usize..=6, d in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cost = squared_cost(random_cloud(&mut rng, n, d).view(), random_cloud(&mut rng, n, d).view()).unwrap();
            let plan = solve_ot(&cost).unwrap();
            let oracle = permutation_oracle(cost.values());
            prop_assert!((plan.objective - oracle).abs() <= 1e-12 * oracle.max(1e-300));
        }

        #[test]
        fn homogeneous_and_permutation_invariant(seed in 0u64..10_000, s in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, n) = (rng.gen_range(1..9), rng.gen_range(1..9));
            let a = random_cloud(&mut rng, m, 2);
            let b = random_cloud(&mut rng, n, 2);
            let w = wasserstein2(a.view(), b.view()).unwrap();
            let ws = wasserstein2((&a * s).view(), (&b * s).view()).unwrap();
            prop_assert!((ws - s * w).abs() <= 1e-10 * (1.0 + s * w));
            let mut rows: Vec<usize> = (0..m).collect();
            rand::seq::SliceRandom::shuffle(rows.as_mut_slice(), &mut rng);
            let ap = a.select(ndarray::Axis(0), &rows);
            let wp = wasserstein2(ap.view(), b.view()).unwrap();
            prop_assert!((wp - w).abs() <= 1e-10 * (1.0 + w));
        }
    }
}
