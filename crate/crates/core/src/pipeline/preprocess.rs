//! Feature standardization and PCA over pooled node embeddings.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::NodeEmbedding;

/// Columns with a standard deviation below this are centered but not scaled.
pub const MIN_STD: f64 = 1e-12;

pub(crate) fn pool(embeddings: &[&NodeEmbedding]) -> Result<Array2<f64>> {
    if embeddings.is_empty() {
        return Err(Error::Empty("no node embeddings"));
    }
    let views: Vec<_> = embeddings.iter().map(|z| z.view()).collect();
    let pooled = ndarray::concatenate(Axis(0), &views)
        .map_err(|_| Error::Inconsistent("node embeddings differ in dimension".into()))?;
    if pooled.nrows() == 0 {
        return Err(Error::Empty("no nodes"));
    }
    Ok(pooled)
}

/// Per-column mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(embeddings: &[&NodeEmbedding]) -> Result<Self> {
        let pooled = pool(embeddings)?;
        let mean = pooled.mean_axis(Axis(0)).expect("non-empty");
        let std = pooled.std_axis(Axis(0), 0.0);
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, z: &NodeEmbedding) -> Result<NodeEmbedding> {
        if z.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: z.ncols(),
            });
        }
        let scale = self.std.mapv(|s| if s < MIN_STD { 1.0 } else { s });
        Ok((z - &self.mean) / &scale)
    }
}

/// Standardizes every embedding with statistics pooled over all of them.
pub fn standardize(embeddings: &[NodeEmbedding]) -> Result<(Vec<NodeEmbedding>, Standardizer)> {
    let refs: Vec<_> = embeddings.iter().collect();
    let s = Standardizer::fit(&refs)?;
    let out = embeddings.iter().map(|z| s.apply(z)).collect::<Result<_>>()?;
    Ok((out, s))
}

/// Principal components of pooled rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Array1<f64>,
    /// `d x k`, orthonormal columns.
    pub components: Array2<f64>,
    /// All `d` covariance eigenvalues, descending.
    pub eigenvalues: Array1<f64>,
}

impl Pca {
    /// Fits `k` components. The covariance uses the `n - 1` normalization;
    /// each component's largest-magnitude coordinate is made positive.
    pub fn fit(points: ArrayView2<f64>, k: usize) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 {
            return Err(Error::Empty("no points for PCA"));
        }
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!(
                "PCA dimension {k} must lie in 1..={d}"
            )));
        }
        let mean = points.mean_axis(Axis(0)).expect("non-empty");
        let centered = &points - &mean;
        let cov = centered.t().dot(&centered) / (n.max(2) - 1) as f64;
        let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let eigenvalues = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
        let mut components = Array2::zeros((d, k));
        for (c, &i) in order.iter().take(k).enumerate() {
            let v = eig.eigenvectors.column(i);
            let pivot = (0..d)
                .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
                .expect("d >= 1");
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for r in 0..d {
                components[[r, c]] = sign * v[r];
            }
        }
        Ok(Pca {
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn dims(&self) -> usize {
        self.components.ncols()
    }

    pub fn transform(&self, z: &NodeEmbedding) -> Result<NodeEmbedding> {
        if z.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: z.ncols(),
            });
        }
        Ok((z - &self.mean).dot(&self.components))
    }

    pub fn inverse_transform(&self, y: &Array2<f64>) -> Array2<f64> {
        y.dot(&self.components.t()) + &self.mean
    }
}

/// Projects pooled rows onto their top `dims` principal components.
pub fn pca(points: ArrayView2<f64>, dims: usize) -> Result<(Array2<f64>, Pca)> {
    let fit = Pca::fit(points, dims)?;
    let projected = (&points - &fit.mean).dot(&fit.components);
    Ok((projected, fit))
}
