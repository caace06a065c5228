//! Linear optimal transport embedding against a fixed reference.
//!
//! A cloud `Z_i` maps to `phi(Z_i) = (F_i - Z_0) / sqrt(N)`, where row `j` of
//! `F_i` is the barycenter of the mass that reference point `j` sends to
//! `Z_i`. Distances between embeddings are Frobenius norms.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::{squared_cost, OtSolver, TransportPlan};
use crate::reference::Reference;

/// Displacement field of one cloud, `N x d`, tagged with its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEmbedding {
    pub phi: Array2<f64>,
    pub reference_id: u64,
}

impl GraphEmbedding {
    /// Row-major flattening, length `N d`.
    pub fn flatten(&self) -> Vec<f64> {
        self.phi.iter().copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.phi.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// `F[j] = sum_k plan[j][k] z[k] / sum_k plan[j][k]`.
pub fn barycentric_project(plan: &TransportPlan, z: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (m, n) = plan.mass.dim();
    if n != z.nrows() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: z.nrows(),
        });
    }
    let mut out = Array2::zeros((m, z.ncols()));
    for (j, row) in plan.mass.outer_iter().enumerate() {
        let total: f64 = row.sum();
        if !(total > 0.0) {
            return Err(Error::Inconsistent(format!("reference point {j} carries no mass")));
        }
        let mut target = out.row_mut(j);
        for (k, &x) in row.iter().enumerate() {
            if x > 0.0 {
                target.scaled_add(x / total, &z.row(k));
            }
        }
    }
    Ok(out)
}

fn check_dims(z: ArrayView2<f64>, reference: &Reference) -> Result<()> {
    if z.nrows() == 0 {
        return Err(Error::Empty("point cloud"));
    }
    if z.ncols() != reference.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            got: z.ncols(),
        });
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("point cloud"));
    }
    Ok(())
}

/// Embeds one cloud, counting the solve on `solver`.
pub fn lot_embed_with(solver: &OtSolver, z: ArrayView2<f64>, reference: &Reference) -> Result<GraphEmbedding> {
    check_dims(z, reference)?;
    let z0 = reference.points.view();
    let plan = solver.solve(&squared_cost(z0, z)?)?;
    let f = barycentric_project(&plan, z)?;
    let scale = (reference.size() as f64).sqrt();
    Ok(GraphEmbedding {
        phi: (f - &z0) / scale,
        reference_id: reference.id(),
    })
}

pub fn lot_embed(z: ArrayView2<f64>, reference: &Reference) -> Result<GraphEmbedding> {
    lot_embed_with(&OtSolver::new(), z, reference)
}

fn check_same_reference(a: &GraphEmbedding, b: &GraphEmbedding) -> Result<()> {
    if a.reference_id != b.reference_id {
        return Err(Error::ReferenceMismatch);
    }
    if a.phi.dim() != b.phi.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.phi.len(),
            got: b.phi.len(),
        });
    }
    Ok(())
}

pub fn lot_distance(a: &GraphEmbedding, b: &GraphEmbedding) -> Result<f64> {
    check_same_reference(a, b)?;
    Ok(a.phi
        .iter()
        .zip(b.phi.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Point cloud `sqrt(N) phi + Z_0` represented by an embedding.
pub fn pseudo_invert(e: &GraphEmbedding, reference: &Reference) -> Result<Array2<f64>> {
    if e.reference_id != reference.id() {
        return Err(Error::ReferenceMismatch);
    }
    Ok(&e.phi * (reference.size() as f64).sqrt() + &reference.points)
}

pub fn embedding_mean(embeddings: &[GraphEmbedding]) -> Result<GraphEmbedding> {
    let first = embeddings.first().ok_or(Error::Empty("no embeddings to average"))?;
    for e in &embeddings[1..] {
        check_same_reference(first, e)?;
    }
    let views: Vec<_> = embeddings.iter().map(|e| e.phi.view()).collect();
    let stacked = ndarray::stack(Axis(0), &views).expect("shapes checked");
    Ok(GraphEmbedding {
        phi: stacked.mean_axis(Axis(0)).expect("non-empty"),
        reference_id: first.reference_id,
    })
}

/// `alpha a + (1 - alpha) b` for `alpha` in `[0, 1]`.
pub fn embedding_geodesic(a: &GraphEmbedding, b: &GraphEmbedding, alpha: f64) -> Result<GraphEmbedding> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    check_same_reference(a, b)?;
    Ok(GraphEmbedding {
        phi: &a.phi * alpha + &b.phi * (1.0 - alpha),
        reference_id: a.reference_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::wasserstein2;
    use crate::reference::Provenance;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.gen_range(-3.0..3.0))
    }

    fn reference(points: Array2<f64>) -> Reference {
        Reference::new(points, Provenance::Given, 0).unwrap()
    }

    #[test]
    fn reference_embeds_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [1, 2, 3, 7, 13] {
            let r = reference(cloud(&mut rng, n, 3));
            let e = lot_embed(r.points.view(), &r).unwrap();
            assert!(e.phi.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn equal_sizes_norm_is_the_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let r = reference(cloud(&mut rng, 6, 2));
            let z = cloud(&mut rng, 6, 2);
            let w = wasserstein2(r.points.view(), z.view()).unwrap();
            let e = lot_embed(z.view(), &r).unwrap();
            assert!((e.norm() - w).abs() <= 1e-9 * w.max(1.0));
        }
    }

    #[test]
    fn rectangular_norm_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let r = reference(cloud(&mut rng, 5, 2));
            let z = cloud(&mut rng, 9, 2);
            let w = wasserstein2(r.points.view(), z.view()).unwrap();
            assert!(lot_embed(z.view(), &r).unwrap().norm() <= w + 1e-9);
        }
    }

    #[test]
    fn translation_moves_the_embedding_rigidly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = reference(cloud(&mut rng, 8, 2));
        let z = cloud(&mut rng, 11, 2);
        let t = array![1.5, -0.25];
        let a = lot_embed(z.view(), &r).unwrap();
        let b = lot_embed((&z + &t).view(), &r).unwrap();
        let d = lot_distance(&a, &b).unwrap();
        let expected = (1.5f64 * 1.5 + 0.25 * 0.25).sqrt();
        assert!((d - expected).abs() < 1e-9);
    }

    #[test]
    fn pseudo_inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r = reference(cloud(&mut rng, 7, 3));
        let z = cloud(&mut rng, 7, 3);
        let e = lot_embed(z.view(), &r).unwrap();
        let back = pseudo_invert(&e, &r).unwrap();
        // equal sizes give a permutation, so the cloud comes back reordered
        let mut got: Vec<Vec<f64>> = back.outer_iter().map(|x| x.to_vec()).collect();
        let mut want: Vec<Vec<f64>> = z.outer_iter().map(|x| x.to_vec()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, w) in got.iter().zip(&want) {
            for (x, y) in g.iter().zip(w) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn barycenter_of_split_mass() {
        let cost = crate::ot::CostMatrix::new(array![[0.0, 0.0]]).unwrap();
        let plan = TransportPlan::from_mass(array![[0.5, 0.5]], &cost);
        let f = barycentric_project(&plan, array![[0.0, 2.0], [4.0, 0.0]].view()).unwrap();
        assert_eq!(f, array![[2.0, 1.0]]);
    }

    #[test]
    fn geodesic_and_mean() {
        let a = GraphEmbedding { phi: array![[1.0, 2.0]], reference_id: 1 };
        let b = GraphEmbedding { phi: array![[3.0, -2.0]], reference_id: 1 };
        assert_eq!(embedding_geodesic(&a, &b, 1.0).unwrap(), a);
        assert_eq!(embedding_geodesic(&a, &b, 0.0).unwrap(), b);
        assert_eq!(embedding_geodesic(&a, &b, 0.5).unwrap().phi, array![[2.0, 0.0]]);
        assert_eq!(embedding_mean(&[a.clone(), b.clone()]).unwrap().phi, array![[2.0, 0.0]]);
        assert!(embedding_geodesic(&a, &b, 1.5).is_err());
        assert!(embedding_geodesic(&a, &b, f64::NAN).is_err());
        assert!(embedding_mean(&[]).is_err());
    }

    #[test]
    fn mismatched_references_are_rejected() {
        let a = GraphEmbedding { phi: array![[1.0]], reference_id: 1 };
        let b = GraphEmbedding { phi: array![[1.0]], reference_id: 2 };
        assert!(matches!(lot_distance(&a, &b), Err(Error::ReferenceMismatch)));
        assert!(matches!(embedding_mean(&[a.clone(), b.clone()]), Err(Error::ReferenceMismatch)));
        let r = reference(array![[0.0, 0.0]]);
        assert!(matches!(lot_embed(array![[1.0]].view(), &r), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(pseudo_invert(&a, &r), Err(Error::ReferenceMismatch)));
    }

    #[test]
    fn solver_counts_one_solve_per_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = reference(cloud(&mut rng, 4, 2));
        let solver = OtSolver::new();
        for _ in 0..5 {
            lot_embed_with(&solver, cloud(&mut rng, 6, 2).view(), &r).unwrap();
        }
        assert_eq!(solver.solves(), 5);
    }
}
