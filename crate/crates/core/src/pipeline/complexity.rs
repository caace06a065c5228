//! Solve counts and timings of reference-based embedding versus all-pairs
//! Wasserstein distances on synthetic graphs.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph};
use crate::lot::lot_embed_with;
use crate::ot::OtSolver;
use crate::reference::normal_reference;

use super::{node_embeddings, PipelineConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub sizes: Vec<usize>,
    pub nodes_per_graph: usize,
    pub edge_prob: f64,
    /// All-pairs distances are computed only for `M` up to this bound.
    pub pairwise_max: usize,
    /// Timings are the minimum over this many runs.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            sizes: vec![50, 100, 200, 400],
            nodes_per_graph: 30,
            edge_prob: 0.2,
            pairwise_max: 100,
            repeats: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub m: usize,
    pub wegl_solves: usize,
    pub wegl_seconds: f64,
    pub pairwise_solves: Option<usize>,
    pub pairwise_seconds: Option<f64>,
}

/// Erdos-Renyi graph on `n` nodes.
pub fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).expect("edges are in range")
}

/// Runs serially so that timings scale with the work done.
pub fn complexity_probe(config: &ProbeConfig) -> Result<Vec<ProbeRow>> {
    if config.nodes_per_graph == 0 || config.repeats == 0 || !(0.0..=1.0).contains(&config.edge_prob) {
        return Err(Error::InvalidArgument(format!("invalid probe config {config:?}")));
    }
    let mut rows = Vec::new();
    for &m in &config.sizes {
        if m == 0 {
            return Err(Error::InvalidArgument("probe sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ m as u64);
        let graphs = (0..m)
            .map(|_| random_graph(config.nodes_per_graph, config.edge_prob, &mut rng).with_label(0))
            .collect();
        let ds = Dataset::new("probe", graphs)?;
        let pipeline = PipelineConfig {
            seed: config.seed,
            ..Default::default()
        };
        let clouds = node_embeddings(&ds, &pipeline)?;
        let reference = normal_reference(config.nodes_per_graph, clouds[0].ncols(), config.seed)?;

        let mut wegl_seconds = f64::INFINITY;
        let mut wegl_solves = 0;
        for _ in 0..config.repeats {
            let solver = OtSolver::new();
            let start = Instant::now();
            for z in &clouds {
                lot_embed_with(&solver, z.view(), &reference)?;
            }
            wegl_seconds = wegl_seconds.min(start.elapsed().as_secs_f64());
            wegl_solves = solver.solves();
        }

        let (pairwise_solves, pairwise_seconds) = if m <= config.pairwise_max {
            let solver = OtSolver::new();
            let start = Instant::now();
            for i in 0..m {
                for j in i + 1..m {
                    solver.wasserstein2(clouds[i].view(), clouds[j].view())?;
                }
            }
            (Some(solver.solves()), Some(start.elapsed().as_secs_f64()))
        } else {
            (None, None)
        };
        log::info!("probe M={m}: {wegl_solves} solves in {wegl_seconds:.4}s");
        rows.push(ProbeRow {
            m,
            wegl_solves,
            wegl_seconds,
            pairwise_solves,
            pairwise_seconds,
        });
    }
    Ok(rows)
}

pub fn probe_csv(rows: &[ProbeRow]) -> String {
    let opt = |x: Option<String>| x.unwrap_or_default();
    let mut out = String::from("M,wegl_solves,wegl_seconds,pairwise_solves,pairwise_seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.m,
            r.wegl_solves,
            r.wegl_seconds,
            opt(r.pairwise_solves.map(|s| s.to_string())),
            opt(r.pairwise_seconds.map(|s| s.to_string())),
        ));
    }
    out
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("slope needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("log-log slope needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}
