//! `wegl`: embed graph datasets, evaluate embeddings, and run the ring demo
//! and timing benchmark.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use wegl::diffusion::Pooling;
use wegl::graph::{parse_tud, read_json, write_json, write_tud, Dataset};
use wegl::io::{read_embedded, write_csv, write_embedded, write_reference};
use wegl::lot::{embedding_geodesic, embedding_mean, lot_embed_with, pseudo_invert, GraphEmbedding};
use wegl::ot::OtSolver;
use wegl::pipeline::{complexity_probe, knn_cross_validate, loglog_slope, probe_csv, wegl_embed, PipelineConfig, ProbeConfig, ReferenceSource};
use wegl::reference::{normal_reference, reference_size};
use wegl::ring::{circle_fit, make_rings, RingParams};

use manifest::RunManifest;

const GEODESIC_ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Parser)]
#[command(name = "wegl", version, about = "Linear Wasserstein embeddings for graph datasets")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a dataset (TU directory or JSON file) into fixed-size vectors.
    Embed {
        #[arg(long)]
        dataset: PathBuf,
        /// Dataset name for TU directories (default: directory name).
        #[arg(long)]
        name: Option<String>,
        /// JSON pipeline configuration; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        layers: Option<usize>,
        /// concat, average or final.
        #[arg(long, value_parser = parse_enum::<Pooling>)]
        pooling: Option<Pooling>,
        /// kmeans_all, kmeans_train or normal.
        #[arg(long, value_parser = parse_enum::<ReferenceSource>)]
        reference: Option<ReferenceSource>,
        #[arg(long)]
        pca_dims: Option<usize>,
    },
    /// k-NN cross-validated accuracy of an embedding file.
    Classify {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Embed synthetic ring clouds; write their mean and geodesics as CSV.
    Ringdemo {
        #[arg(long, default_value_t = 20)]
        m: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve counts and timings versus the number of graphs.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [50usize, 100, 200, 400])]
        sizes: Vec<usize>,
        /// JSON probe configuration; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        pairwise_max: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output (default: stdout only).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert between a TU directory and a JSON file.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Dataset name for TU directories (default: directory name).
        #[arg(long)]
        name: Option<String>,
    },
}

/// Exit 2 for usage and configuration errors, 1 for runtime failures.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<wegl::Error> for Failure {
    fn from(e: wegl::Error) -> Self {
        match e {
            wegl::Error::MissingFile(_) => Failure::Usage(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// `--seed`, then the config file's `seed`, then `WEGL_SEED`, then 0.
fn resolve_seed(flag: Option<u64>, from_config: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag.or(from_config) {
        return Ok(s);
    }
    match std::env::var("WEGL_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(anyhow!("WEGL_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

/// Parses a JSON config, reporting whether it set `seed` explicitly.
fn load_json_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<(T, Option<u64>), Failure> {
    let Some(path) = path else {
        return Ok((T::default(), None));
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(anyhow!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(anyhow!("config {} is not valid JSON: {e}", path.display())))?;
    let seed = value.get("seed").and_then(serde_json::Value::as_u64);
    let config = serde_json::from_value(value).map_err(|e| Failure::Usage(anyhow!("invalid config {}: {e}", path.display())))?;
    Ok((config, seed))
}

fn load_dataset(path: &Path, name: Option<&str>) -> Result<Dataset, Failure> {
    if !path.exists() {
        return Err(Failure::Usage(anyhow!("dataset {} does not exist", path.display())));
    }
    if path.is_dir() {
        let name = match name {
            Some(n) => n.to_string(),
            None => path
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Failure::Usage(anyhow!("cannot infer a dataset name from {}", path.display())))?
                .to_string(),
        };
        Ok(parse_tud(path, &name)?)
    } else {
        Ok(read_json(path)?)
    }
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::Runtime)
}

#[allow(clippy::too_many_arguments)]
fn cmd_embed(
    dataset: &Path,
    name: Option<&str>,
    config_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    layers: Option<usize>,
    pooling: Option<Pooling>,
    reference: Option<ReferenceSource>,
    pca_dims: Option<usize>,
) -> CmdResult {
    let (mut config, config_seed) = load_json_config::<PipelineConfig>(config_path)?;
    config.seed = resolve_seed(seed, config_seed)?;
    if let Some(l) = layers {
        config.diffusion.num_layers = l;
    }
    if let Some(p) = pooling {
        config.diffusion.pooling = p;
    }
    if let Some(r) = reference {
        config.reference = r;
    }
    if pca_dims.is_some() {
        config.pca_dims = pca_dims;
    }
    config.validate().map_err(|e| Failure::Usage(e.into()))?;

    let ds = load_dataset(dataset, name)?;
    let mut manifest = RunManifest::new("embed", config.seed);
    let ed = wegl_embed(&ds, &config)?;

    create_dir(out)?;
    let bin = out.join("embeddings.bin");
    write_embedded(&bin, &ed)?;
    manifest.record(&bin)?;
    let csv = out.join("embeddings.csv");
    write_csv(&csv, ed.vectors.view(), ed.labels.as_deref())?;
    manifest.record(&csv)?;
    let reference = out.join("reference.bin");
    write_reference(&reference, &ed.reference)?;
    manifest.record(&reference)?;

    manifest.config_digest = Some(ed.config_digest.clone());
    manifest.config = Some(serde_json::to_value(&config).context("serializing config")?);
    manifest.dataset = Some(ed.name.clone());
    manifest.ot_solves = Some(ed.ot_solves);
    let digest = manifest.outputs[0].sha256.clone();
    manifest.finish(out)?;
    println!(
        "embedded {} graphs into {} dimensions ({} transport solves)",
        ed.vectors.nrows(),
        ed.vectors.ncols(),
        ed.ot_solves
    );
    println!("embeddings sha256 {digest}");
    Ok(())
}

fn cmd_classify(path: &Path, k: usize, folds: usize, seed: Option<u64>) -> CmdResult {
    let seed = resolve_seed(seed, None)?;
    if k == 0 || folds < 2 {
        return Err(Failure::Usage(anyhow!("need k >= 1 and folds >= 2")));
    }
    let ed = read_embedded(path)?;
    let labels = ed
        .labels
        .ok_or_else(|| Failure::Usage(anyhow!("{} has no graph labels", path.display())))?;
    let report = knn_cross_validate(ed.vectors.view(), &labels, k, folds, seed)?;
    println!(
        "accuracy: {:.1} ± {:.1}",
        report.mean_accuracy * 100.0,
        report.std_accuracy * 100.0
    );
    if let Some(auc) = report.auc {
        println!("auc: {auc:.4}");
    }
    Ok(())
}

fn points_csv(points: &ndarray::Array2<f64>) -> String {
    let mut s = String::from("x,y\n");
    for p in points.outer_iter() {
        s.push_str(&format!("{:?},{:?}\n", p[0], p[1]));
    }
    s
}

fn cmd_ringdemo(m: usize, noise: f64, seed: Option<u64>, out: &Path) -> CmdResult {
    let seed = resolve_seed(seed, None)?;
    if m == 0 || !(noise >= 0.0 && noise.is_finite()) {
        return Err(Failure::Usage(anyhow!("need m >= 1 and a finite noise >= 0")));
    }
    let params = RingParams {
        noise,
        ..RingParams::default()
    };
    let rings = make_rings(m, &params, seed)?;
    let n = reference_size(&rings.iter().map(|r| r.points.nrows()).collect::<Vec<_>>())?;
    let reference = normal_reference(n, 2, seed)?;
    let solver = OtSolver::new();
    let embs = rings
        .iter()
        .map(|r| lot_embed_with(&solver, r.points.view(), &reference))
        .collect::<wegl::Result<Vec<_>>>()?;

    create_dir(out)?;
    let mut manifest = RunManifest::new("ringdemo", seed);
    for (i, ring) in rings.iter().enumerate() {
        manifest.write(&out.join(format!("ring_{i:03}.csv")), points_csv(&ring.points).as_bytes())?;
    }
    manifest.write(&out.join("reference.csv"), points_csv(&reference.points).as_bytes())?;
    let mean = pseudo_invert(&embedding_mean(&embs)?, &reference)?;
    manifest.write(&out.join("mean.csv"), points_csv(&mean).as_bytes())?;

    // between the first two rings, or the first ring and the reference
    let target = embs.get(1).cloned().unwrap_or_else(|| GraphEmbedding {
        phi: ndarray::Array2::zeros(embs[0].phi.raw_dim()),
        reference_id: embs[0].reference_id,
    });
    for alpha in GEODESIC_ALPHAS {
        let frame = pseudo_invert(&embedding_geodesic(&embs[0], &target, alpha)?, &reference)?;
        manifest.write(&out.join(format!("geodesic_{alpha:.2}.csv")), points_csv(&frame).as_bytes())?;
    }
    manifest.ot_solves = Some(solver.solves());
    manifest.config = Some(serde_json::to_value(&params).context("serializing ring parameters")?);
    manifest.finish(out)?;

    let fit = circle_fit(mean.view())?;
    println!(
        "mean circle fit: center ({:.4}, {:.4}) radius {:.4} relative residual {:.6}",
        fit.center[0], fit.center[1], fit.radius, fit.relative_residual
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    sizes: Vec<usize>,
    config_path: Option<&Path>,
    nodes: Option<usize>,
    pairwise_max: Option<usize>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> CmdResult {
    let (mut config, config_seed) = load_json_config::<ProbeConfig>(config_path)?;
    config.seed = resolve_seed(seed, config_seed)?;
    config.sizes = sizes;
    if let Some(n) = nodes {
        config.nodes_per_graph = n;
    }
    if let Some(p) = pairwise_max {
        config.pairwise_max = p;
    }
    let rows = complexity_probe(&config).map_err(|e| match e {
        wegl::Error::InvalidArgument(_) => Failure::Usage(e.into()),
        other => other.into(),
    })?;
    let csv = probe_csv(&rows);
    print!("{csv}");
    if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.wegl_seconds.max(1e-9)).collect();
        eprintln!("log-log slope of embedding time vs M: {:.3}", loglog_slope(&xs, &ys)?);
    }
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            create_dir(dir)?;
        }
        let mut manifest = RunManifest::new("bench", config.seed);
        manifest.write(path, csv.as_bytes())?;
        manifest.config = Some(serde_json::to_value(&config).context("serializing probe config")?);
        manifest.ot_solves = Some(rows.iter().map(|r| r.wegl_solves + r.pairwise_solves.unwrap_or(0)).sum());
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        manifest.finish(dir)?;
    }
    Ok(())
}

fn cmd_convert(input: &Path, output: &Path, name: Option<&str>) -> CmdResult {
    let ds = load_dataset(input, name)?;
    if input.is_dir() {
        write_json(&ds, output)?;
    } else {
        create_dir(output)?;
        write_tud(&ds, output)?;
    }
    println!("converted {} graphs ({})", ds.len(), ds.name);
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Usage(anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Embed {
            dataset,
            name,
            config,
            out,
            seed,
            layers,
            pooling,
            reference,
            pca_dims,
        } => cmd_embed(
            &dataset,
            name.as_deref(),
            config.as_deref(),
            &out,
            seed,
            layers,
            pooling,
            reference,
            pca_dims,
        ),
        Command::Classify { embeddings, k, folds, seed } => cmd_classify(&embeddings, k, folds, seed),
        Command::Ringdemo { m, noise, seed, out } => cmd_ringdemo(m, noise, seed, &out),
        Command::Bench {
            sizes,
            config,
            nodes,
            pairwise_max,
            seed,
            out,
        } => cmd_bench(sizes, config.as_deref(), nodes, pairwise_max, seed, out.as_deref()),
        Command::Convert { input, output, name } => cmd_convert(&input, &output, name.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::sha256_hex;

    #[test]
    fn enum_flags_use_config_spelling() {
        assert_eq!(parse_enum::<Pooling>("final").unwrap(), Pooling::Final);
        assert_eq!(parse_enum::<ReferenceSource>("kmeans_train").unwrap(), ReferenceSource::KmeansTrain);
        assert!(parse_enum::<Pooling>("max").is_err());
    }

    #[test]
    fn flag_seed_wins_over_config() {
        assert_eq!(resolve_seed(Some(3), Some(4)).ok(), Some(3));
        assert_eq!(resolve_seed(None, Some(4)).ok(), Some(4));
    }

    #[test]
    fn digest_helper_is_hex_sha256() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
