//! Synthetic ring-shaped point clouds and a least-squares circle fit.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::NodeEmbedding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingParams {
    pub min_points: usize,
    pub max_points: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Centers are uniform on `[-center_range, center_range]^2`.
    pub center_range: f64,
    /// Relative radial noise: each point's radius is `r (1 + noise g)`.
    pub noise: f64,
}

impl Default for RingParams {
    fn default() -> Self {
        RingParams {
            min_points: 60,
            max_points: 140,
            min_radius: 1.0,
            max_radius: 3.0,
            center_range: 4.0,
            noise: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub center: [f64; 2],
    pub radius: f64,
    pub points: NodeEmbedding,
}

impl RingParams {
    fn validate(&self) -> Result<()> {
        let ok = self.min_points >= 1
            && self.min_points <= self.max_points
            && self.min_radius > 0.0
            && self.min_radius <= self.max_radius
            && self.center_range >= 0.0
            && self.noise >= 0.0
            && [self.min_radius, self.max_radius, self.center_range, self.noise]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid ring parameters {self:?}")))
        }
    }
}

/// `n` points at uniform angles around a circle with radial noise.
pub fn ring_cloud(center: [f64; 2], radius: f64, n: usize, noise: f64, rng: &mut impl Rng) -> NodeEmbedding {
    let mut points = Array2::zeros((n, 2));
    for mut p in points.outer_iter_mut() {
        let theta = rng.gen_range(0.0..TAU);
        let g: f64 = rng.sample(StandardNormal);
        let r = radius * (1.0 + noise * g);
        p[0] = center[0] + r * theta.cos();
        p[1] = center[1] + r * theta.sin();
    }
    points
}

pub fn make_rings(m: usize, params: &RingParams, seed: u64) -> Result<Vec<Ring>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..m)
        .map(|_| {
            let n = rng.gen_range(params.min_points..=params.max_points);
            let radius = if params.min_radius == params.max_radius {
                params.min_radius
            } else {
                rng.gen_range(params.min_radius..params.max_radius)
            };
            let center = if params.center_range == 0.0 {
                [0.0, 0.0]
            } else {
                let c = params.center_range;
                [rng.gen_range(-c..c), rng.gen_range(-c..c)]
            };
            let points = ring_cloud(center, radius, n, params.noise, &mut rng);
            Ring { center, radius, points }
        })
        .collect())
}

/// `m` ring clouds with default parameters and the given radial noise.
pub fn make_ring_dataset(m: usize, noise: f64, seed: u64) -> Result<Vec<NodeEmbedding>> {
    let params = RingParams {
        noise,
        ..RingParams::default()
    };
    Ok(make_rings(m, &params, seed)?.into_iter().map(|r| r.points).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleFit {
    pub center: [f64; 2],
    pub radius: f64,
    /// Root-mean-square of `|p - center| - radius`, divided by `radius`.
    pub relative_residual: f64,
}

/// Algebraic least-squares circle through 2-D points.
pub fn circle_fit(points: ArrayView2<f64>) -> Result<CircleFit> {
    if points.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: points.ncols(),
        });
    }
    if points.nrows() < 3 {
        return Err(Error::InvalidArgument("a circle fit needs at least 3 points".into()));
    }
    // x^2 + y^2 = a x + b y + c, solved through the normal equations
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for p in points.outer_iter() {
        let row = Vector3::new(p[0], p[1], 1.0);
        ata += row * row.transpose();
        atb += row * (p[0] * p[0] + p[1] * p[1]);
    }
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::InvalidArgument("points are collinear".into()))?;
    let center = [sol[0] / 2.0, sol[1] / 2.0];
    let r2 = sol[2] + center[0] * center[0] + center[1] * center[1];
    if !(r2 > 0.0) {
        return Err(Error::InvalidArgument("degenerate circle fit".into()));
    }
    let radius = r2.sqrt();
    let ss: f64 = points
        .outer_iter()
        .map(|p| {
            let d = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt() - radius;
            d * d
        })
        .sum();
    let rms = (ss / points.nrows() as f64).sqrt();
    Ok(CircleFit {
        center,
        radius,
        relative_residual: rms / radius,
    })
}
