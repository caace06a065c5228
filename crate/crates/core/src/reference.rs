//! Reference point clouds: k-means centroids of pooled node embeddings, or
//! Gaussian samples.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::NodeEmbedding;

const MAX_ITER: usize = 300;
const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Kmeans,
    Normal,
    /// Supplied directly by the caller.
    Given,
}

/// Reference support points `Z_0`, `N x d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub points: Array2<f64>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl Reference {
    pub fn new(points: Array2<f64>, provenance: Provenance, seed: u64) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::Empty("reference has no points"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("reference points"));
        }
        Ok(Reference {
            points,
            provenance,
            seed,
        })
    }

    pub fn given(points: Array2<f64>) -> Result<Self> {
        Self::new(points, Provenance::Given, 0)
    }

    pub fn size(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Content hash of the shape and point coordinates.
    pub fn id(&self) -> u64 {
        let mut h = Sha256::new();
        h.update((self.points.nrows() as u64).to_le_bytes());
        h.update((self.points.ncols() as u64).to_le_bytes());
        for x in self.points.iter() {
            h.update(x.to_bits().to_le_bytes());
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
    }
}

/// `floor(mean N_i)`, at least one.
pub fn reference_size(sizes: &[usize]) -> Result<usize> {
    if sizes.is_empty() {
        return Err(Error::Empty("no graphs to size the reference from"));
    }
    let total: usize = sizes.iter().sum();
    Ok((total / sizes.len()).max(1))
}

pub fn reference_size_of(embeddings: &[NodeEmbedding]) -> Result<usize> {
    reference_size(&embeddings.iter().map(|z| z.nrows()).collect::<Vec<_>>())
}

/// `n` i.i.d. standard-normal `d`-vectors.
pub fn normal_reference(n: usize, d: usize, seed: u64) -> Result<Reference> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!(
            "normal reference needs n, d >= 1 (got {n}, {d})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));
    Reference::new(points, Provenance::Normal, seed)
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: Array2<f64>,
    /// Inertia after each assignment step.
    pub inertia: Vec<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex_cmp(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Samples an index with probability proportional to `weights`; falls back
/// to a uniform draw when all weights vanish.
fn sample_weighted(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return rng.gen_range(0..weights.len());
    }
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if acc > target && w > 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn plus_plus(points: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut closest: Vec<f64> = points
        .outer_iter()
        .map(|p| sq_dist(p, centroids.row(0)))
        .collect();
    for c in 1..k {
        let next = sample_weighted(&closest, rng);
        centroids.row_mut(c).assign(&points.row(next));
        for (d, p) in closest.iter_mut().zip(points.outer_iter()) {
            *d = d.min(sq_dist(p, centroids.row(c)));
        }
    }
    centroids
}

/// Nearest centroid (ties to the lowest index) and its squared distance.
fn assign(points: ArrayView2<f64>, centroids: &Array2<f64>) -> Vec<(usize, f64)> {
    let rows: Vec<_> = points.outer_iter().collect();
    rows.par_iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (c, centroid) in centroids.outer_iter().enumerate() {
                let d = sq_dist(*p, centroid);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect()
}

/// Lloyd's algorithm from k-means++ seeding.
///
/// Points are sorted lexicographically before seeding, so the result does not
/// depend on input order. Iterates until the relative inertia change drops
/// below `1e-6` or 300 iterations. An empty cluster is re-seeded at the point
/// farthest from its centroid.
pub fn kmeans(points: ArrayView2<f64>, k: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if points.nrows() == 0 {
        return Err(Error::Empty("no points to cluster"));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("k-means input"));
    }
    let mut order: Vec<usize> = (0..points.nrows()).collect();
    order.sort_by(|&a, &b| lex_cmp(points.row(a), points.row(b)));
    let sorted = points.select(Axis(0), &order);
    let points = sorted.view();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(points, k, &mut rng);
    let mut inertia: Vec<f64> = Vec::new();

    for _ in 0..MAX_ITER {
        let assignment = assign(points, &centroids);
        let current: f64 = assignment.iter().map(|a| a.1).sum();
        if let Some(&previous) = inertia.last() {
            debug_assert!(
                current <= previous * (1.0 + 1e-12) + 1e-12,
                "inertia increased: {previous} -> {current}"
            );
        }
        inertia.push(current);
        if inertia.len() >= 2 {
            let previous = inertia[inertia.len() - 2];
            if previous == 0.0 || (previous - current).abs() <= REL_TOL * previous {
                break;
            }
        }

        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (p, &(c, _)) in points.outer_iter().zip(&assignment) {
            sums.row_mut(c).scaled_add(1.0, &p);
            counts[c] += 1;
        }
        let mut taken = vec![false; points.nrows()];
        for c in 0..k {
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centroids.row_mut(c).assign(&mean);
            } else {
                // farthest point from its own centroid, not already used
                let far = assignment
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !taken[*i])
                    .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                taken[far] = true;
                centroids.row_mut(c).assign(&points.row(far));
            }
        }
    }
    Ok(KMeansResult { centroids, inertia })
}

/// k-means reference over the pooled rows of `embeddings`.
pub fn kmeans_reference(embeddings: &[&NodeEmbedding], k: usize, seed: u64) -> Result<Reference> {
    if embeddings.is_empty() {
        return Err(Error::Empty("no embeddings for the reference"));
    }
    let views: Vec<_> = embeddings.iter().map(|z| z.view()).collect();
    let pooled = ndarray::concatenate(Axis(0), &views)
        .map_err(|_| Error::Inconsistent("node embeddings differ in dimension".into()))?;
    let result = kmeans(pooled.view(), k, seed)?;
    Reference::new(result.centroids, Provenance::Kmeans, seed)
}
