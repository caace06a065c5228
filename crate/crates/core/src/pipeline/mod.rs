//! End-to-end embedding of a graph dataset: initial features, diffusion,
//! standardization, optional PCA, reference construction and one transport
//! solve per graph.

mod classify;
mod complexity;
mod preprocess;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffusion::{embed_nodes, DiffusionConfig, Pooling};
use crate::error::{Error, Result};
use crate::graph::{Dataset, DegreeMode};
use crate::lot::lot_embed_with;
use crate::ot::OtSolver;
use crate::reference::{kmeans_reference, normal_reference, reference_size, reference_size_of, Reference};
use crate::NodeEmbedding;

pub use classify::{assign_folds, knn_cross_validate, knn_votes, roc_auc, CvReport};
pub use complexity::{complexity_probe, loglog_slope, probe_csv, random_graph, ProbeConfig, ProbeRow};
pub use preprocess::{pca, standardize, Pca, Standardizer, MIN_STD};

/// Initial node features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeFeatures {
    /// Degree features only for featureless graphs: scalar with concat
    /// pooling, one-hot otherwise.
    Auto,
    /// Keep the dataset's node features.
    Off,
    Scalar,
    OneHot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    /// k-means over the node embeddings of every graph.
    KmeansAll,
    /// k-means over the node embeddings of `train_indices` only.
    KmeansTrain,
    /// Standard-normal samples.
    Normal,
}

/// Which graphs standardization and PCA statistics are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    All,
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub diffusion: DiffusionConfig,
    pub degree_features: DegreeFeatures,
    pub degree_clip: Option<usize>,
    /// One-hot encode categorical edge labels into edge features.
    pub edge_labels: bool,
    pub virtual_node: bool,
    pub standardize: bool,
    pub fit_scope: FitScope,
    pub pca_dims: Option<usize>,
    pub reference: ReferenceSource,
    /// Overrides the default `floor(mean |V_i|)` reference size.
    pub reference_size: Option<usize>,
    pub train_indices: Option<Vec<usize>>,
    pub seed: u64,
    pub knn_k: usize,
    pub cv_folds: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            diffusion: DiffusionConfig::default(),
            degree_features: DegreeFeatures::Auto,
            degree_clip: None,
            edge_labels: true,
            virtual_node: false,
            standardize: true,
            fit_scope: FitScope::All,
            pca_dims: None,
            reference: ReferenceSource::KmeansAll,
            reference_size: None,
            train_indices: None,
            seed: 0,
            knn_k: 5,
            cv_folds: 10,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.knn_k == 0 {
            return Err(Error::InvalidArgument("knn_k must be at least 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidArgument("cv_folds must be at least 2".into()));
        }
        if self.pca_dims == Some(0) {
            return Err(Error::InvalidArgument("pca_dims must be at least 1".into()));
        }
        if self.reference_size == Some(0) {
            return Err(Error::InvalidArgument("reference_size must be at least 1".into()));
        }
        let needs_train = self.reference == ReferenceSource::KmeansTrain || self.fit_scope == FitScope::Train;
        if needs_train && self.train_indices.as_ref().map_or(true, Vec::is_empty) {
            return Err(Error::InvalidArgument(
                "train-scoped fitting needs non-empty train_indices".into(),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn train_subset(&self, len: usize) -> Result<Vec<usize>> {
        let idx = self.train_indices.clone().unwrap_or_default();
        if let Some(&bad) = idx.iter().find(|&&i| i >= len) {
            return Err(Error::InvalidArgument(format!(
                "train index {bad} out of range for {len} graphs"
            )));
        }
        Ok(idx)
    }
}

/// Fixed-size vectors for every graph of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedDataset {
    pub name: String,
    /// `M x (N d)`, row-major flattening of each embedding.
    pub vectors: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    pub num_classes: usize,
    pub reference: Reference,
    pub config_digest: String,
    pub ot_solves: usize,
}

/// Applies the initial-feature options of `config`.
pub fn prepare_dataset(dataset: &Dataset, config: &PipelineConfig) -> Result<Dataset> {
    let mut ds = dataset.clone();
    let mode = match config.degree_features {
        DegreeFeatures::Auto if ds.node_feature_dim == 0 => Some(match config.diffusion.pooling {
            Pooling::Concat => DegreeMode::Scalar,
            Pooling::Average | Pooling::Final => DegreeMode::OneHot,
        }),
        DegreeFeatures::Auto | DegreeFeatures::Off => None,
        DegreeFeatures::Scalar => Some(DegreeMode::Scalar),
        DegreeFeatures::OneHot => Some(DegreeMode::OneHot),
    };
    if let Some(mode) = mode {
        ds = ds.with_degree_features(mode, config.degree_clip)?;
    }
    if ds.edge_label_categories.is_some() {
        if config.edge_labels {
            ds = ds.with_one_hot_edge_features()?;
        } else {
            let mut graphs = ds.graphs;
            for g in &mut graphs {
                g.edge_labels = None;
            }
            ds = Dataset::new(ds.name.clone(), graphs)?;
        }
    }
    if config.virtual_node {
        ds = ds.with_virtual_nodes()?;
    }
    if ds.node_feature_dim == 0 {
        return Err(Error::InvalidArgument(
            "graphs have no node features; enable degree features".into(),
        ));
    }
    Ok(ds)
}

/// Diffused, standardized and optionally projected node embeddings.
pub fn node_embeddings(dataset: &Dataset, config: &PipelineConfig) -> Result<Vec<NodeEmbedding>> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("dataset has no graphs"));
    }
    let ds = prepare_dataset(dataset, config)?;
    let mut embeddings = ds
        .graphs
        .par_iter()
        .map(|g| embed_nodes(g, &config.diffusion))
        .collect::<Result<Vec<_>>>()?;

    let fit_set: Vec<usize> = match config.fit_scope {
        FitScope::All => (0..embeddings.len()).collect(),
        FitScope::Train => config.train_subset(embeddings.len())?,
    };
    if config.standardize {
        let refs: Vec<_> = fit_set.iter().map(|&i| &embeddings[i]).collect();
        let s = Standardizer::fit(&refs)?;
        embeddings = embeddings.par_iter().map(|z| s.apply(z)).collect::<Result<_>>()?;
    }
    if let Some(k) = config.pca_dims {
        let refs: Vec<_> = fit_set.iter().map(|&i| &embeddings[i]).collect();
        let pooled = preprocess::pool(&refs)?;
        let pca = Pca::fit(pooled.view(), k)?;
        embeddings = embeddings.par_iter().map(|z| pca.transform(z)).collect::<Result<_>>()?;
    }
    Ok(embeddings)
}

/// Reference for `embeddings` as configured.
pub fn build_reference(embeddings: &[NodeEmbedding], config: &PipelineConfig) -> Result<Reference> {
    let dim = embeddings.first().ok_or(Error::Empty("no node embeddings"))?.ncols();
    if dim == 0 {
        return Err(Error::InvalidArgument("node embeddings have dimension 0".into()));
    }
    let (size, source): (usize, Vec<&NodeEmbedding>) = match config.reference {
        ReferenceSource::KmeansTrain => {
            let idx = config.train_subset(embeddings.len())?;
            let train: Vec<_> = idx.iter().map(|&i| &embeddings[i]).collect();
            let size = reference_size(&train.iter().map(|z| z.nrows()).collect::<Vec<_>>())?;
            (size, train)
        }
        _ => (reference_size_of(embeddings)?, embeddings.iter().collect()),
    };
    let size = config.reference_size.unwrap_or(size);
    match config.reference {
        ReferenceSource::Normal => normal_reference(size, dim, config.seed),
        ReferenceSource::KmeansAll | ReferenceSource::KmeansTrain => kmeans_reference(&source, size, config.seed),
    }
}

/// LOT embeddings of `clouds`, flattened row-major into the rows of the
/// result. Solves run in parallel; the output does not depend on the worker
/// count.
pub fn embed_clouds(clouds: &[NodeEmbedding], reference: &Reference, solver: &OtSolver) -> Result<Array2<f64>> {
    let width = reference.size() * reference.dim();
    let rows = clouds
        .par_iter()
        .map(|z| lot_embed_with(solver, z.view(), reference).map(|e| e.flatten()))
        .collect::<Result<Vec<_>>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((clouds.len(), width), flat).expect("rows have the reference width"))
}

pub fn wegl_embed(dataset: &Dataset, config: &PipelineConfig) -> Result<EmbeddedDataset> {
    let embeddings = node_embeddings(dataset, config)?;
    let reference = build_reference(&embeddings, config)?;
    let solver = OtSolver::new();
    let vectors = embed_clouds(&embeddings, &reference, &solver)?;
    Ok(EmbeddedDataset {
        name: dataset.name.clone(),
        vectors,
        labels: dataset.labels(),
        num_classes: dataset.num_classes,
        reference,
        config_digest: config.digest(),
        ot_solves: solver.solves(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn toy_dataset() -> Dataset {
        let mut graphs = Vec::new();
        for n in 3..11 {
            let ring: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            graphs.push(Graph::from_edges(n, ring).unwrap().with_label(0));
            let star: Vec<_> = (1..n).map(|i| (0, i)).collect();
            graphs.push(Graph::from_edges(n, star).unwrap().with_label(1));
        }
        Dataset::new("toy", graphs).unwrap()
    }

    #[test]
    fn embeds_with_one_solve_per_graph() {
        let ds = toy_dataset();
        let ed = wegl_embed(&ds, &PipelineConfig::default()).unwrap();
        assert_eq!(ed.ot_solves, ds.len());
        // mean size 6.5, one-hot degrees 0..=9
        assert_eq!(ed.reference.size(), 6);
        assert_eq!(ed.vectors.dim(), (16, 6 * 10));
        assert_eq!(ed.labels.as_deref().unwrap().len(), 16);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let ds = toy_dataset();
        let config = PipelineConfig { pca_dims: Some(3), ..Default::default() };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| wegl_embed(&ds, &config).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = serde_json::from_str::<PipelineConfig>(r#"{"seeed": 1}"#).unwrap_err();
        assert!(err.to_string().contains("seeed"));
        let c: PipelineConfig = serde_json::from_str(r#"{"diffusion": {"pooling": "concat"}, "reference": "normal"}"#).unwrap();
        assert_eq!(c.diffusion.num_layers, 3);
        assert_eq!(c.reference, ReferenceSource::Normal);
    }

    #[test]
    fn train_scope_needs_indices() {
        let ds = toy_dataset();
        let mut config = PipelineConfig { reference: ReferenceSource::KmeansTrain, ..Default::default() };
        assert!(wegl_embed(&ds, &config).is_err());
        config.train_indices = Some(vec![0, 1, 2, 99]);
        assert!(wegl_embed(&ds, &config).is_err());
        config.train_indices = Some(vec![0, 1, 2, 3]);
        config.fit_scope = FitScope::Train;
        let ed = wegl_embed(&ds, &config).unwrap();
        // graphs 0..4 have 3, 3, 4, 4 nodes
        assert_eq!(ed.reference.size(), 3);
    }

    #[test]
    fn featureless_graphs_need_degree_features() {
        let ds = toy_dataset();
        let config = PipelineConfig { degree_features: DegreeFeatures::Off, ..Default::default() };
        assert!(wegl_embed(&ds, &config).is_err());
        let config = PipelineConfig {
            diffusion: DiffusionConfig { num_layers: 2, pooling: Pooling::Concat },
            reference: ReferenceSource::Normal,
            virtual_node: true,
            ..Default::default()
        };
        let ed = wegl_embed(&ds, &config).unwrap();
        // scalar degrees over 3 layers, plus one virtual node per graph
        assert_eq!(ed.reference.dim(), 3);
        assert_eq!(ed.reference.size(), 7);
    }

    #[test]
    fn digest_tracks_config() {
        let a = PipelineConfig::default();
        let b = PipelineConfig { seed: 1, ..Default::default() };
        assert_eq!(a.digest(), PipelineConfig::default().digest());
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
