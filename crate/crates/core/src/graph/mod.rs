//! Attributed graphs, datasets, and initial-feature construction.
//!
//! Graphs are undirected with no stored self-loops; diffusion adds the
//! self-connections itself. Edge features, when present, are nonnegative.

mod json;
mod tud;

use std::collections::BTreeSet;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use json::{dataset_from_json, dataset_to_json, read_json, write_json};
pub use tud::{parse_tud, write_tud};

/// One attributed, undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    /// `num_nodes x F` initial node features.
    pub node_features: Array2<f64>,
    /// `|E| x E_dim` nonnegative edge features.
    pub edge_features: Option<Array2<f64>>,
    /// Categorical edge labels (one row of label values per edge), not yet
    /// one-hot encoded.
    pub edge_labels: Option<Vec<Vec<usize>>>,
    pub label: Option<usize>,
}

impl Graph {
    /// Featureless graph (F = 0) with the given edges.
    pub fn from_edges(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let g = Graph {
            num_nodes,
            edges,
            node_features: Array2::zeros((num_nodes, 0)),
            edge_features: None,
            edge_labels: None,
            label: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_node_features(mut self, features: Array2<f64>) -> Result<Self> {
        self.node_features = features;
        self.validate()?;
        Ok(self)
    }

    pub fn with_edge_features(mut self, features: Array2<f64>) -> Result<Self> {
        self.edge_features = Some(features);
        self.validate()?;
        Ok(self)
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_feature_dim(&self) -> usize {
        self.node_features.ncols()
    }

    pub fn edge_feature_dim(&self) -> Option<usize> {
        self.edge_features.as_ref().map(|f| f.ncols())
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        for &(u, v) in &self.edges {
            for w in [u, v] {
                if w >= self.num_nodes {
                    return Err(Error::NodeIndexOutOfRange {
                        index: w,
                        num_nodes: self.num_nodes,
                    });
                }
            }
            if u == v {
                return Err(Error::Inconsistent(format!("self-loop on node {u}")));
            }
        }
        if self.node_features.nrows() != self.num_nodes {
            return Err(Error::DimensionMismatch {
                expected: self.num_nodes,
                got: self.node_features.nrows(),
            });
        }
        if let Some(ef) = &self.edge_features {
            if ef.nrows() != self.edges.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.edges.len(),
                    got: ef.nrows(),
                });
            }
            if let Some(&w) = ef.iter().find(|w| !(**w >= 0.0)) {
                return Err(Error::NegativeWeight(w));
            }
        }
        if let Some(el) = &self.edge_labels {
            if el.len() != self.edges.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.edges.len(),
                    got: el.len(),
                });
            }
        }
        Ok(())
    }

    /// Number of distinct neighbors of every node (no self-connection).
    pub fn degrees(&self) -> Vec<usize> {
        let mut neighbors = vec![BTreeSet::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            neighbors[u].insert(v);
            neighbors[v].insert(u);
        }
        neighbors.iter().map(BTreeSet::len).collect()
    }

    /// Returns the graph with nodes relabeled so that old node `v` becomes
    /// `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(Error::DimensionMismatch {
                expected: self.num_nodes,
                got: perm.len(),
            });
        }
        let mut features = Array2::zeros(self.node_features.raw_dim());
        for (old, row) in self.node_features.axis_iter(Axis(0)).enumerate() {
            features.row_mut(perm[old]).assign(&row);
        }
        Ok(Graph {
            num_nodes: self.num_nodes,
            edges: self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect(),
            node_features: features,
            edge_features: self.edge_features.clone(),
            edge_labels: self.edge_labels.clone(),
            label: self.label,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeMode {
    Scalar,
    OneHot,
}

/// Replaces the node features with degree features.
///
/// Degrees count neighbors only. `clip` caps the degree before encoding;
/// `max_degree` fixes the one-hot width to `max_degree + 1`.
pub fn degree_features(
    g: &Graph,
    mode: DegreeMode,
    clip: Option<usize>,
    max_degree: usize,
) -> Result<Graph> {
    let degrees: Vec<usize> = g
        .degrees()
        .into_iter()
        .map(|d| clip.map_or(d, |c| d.min(c)))
        .collect();
    let features = match mode {
        DegreeMode::Scalar => Array2::from_shape_fn((g.num_nodes, 1), |(v, _)| degrees[v] as f64),
        DegreeMode::OneHot => {
            let mut f = Array2::zeros((g.num_nodes, max_degree + 1));
            for (v, &d) in degrees.iter().enumerate() {
                if d > max_degree {
                    return Err(Error::DegreeOutOfRange {
                        degree: d,
                        max_degree,
                    });
                }
                f[[v, d]] = 1.0;
            }
            f
        }
    };
    let mut out = g.clone();
    out.node_features = features;
    Ok(out)
}

/// Concatenated one-hot encoding of the categorical edge labels.
pub fn one_hot_edge_features(g: &Graph, num_categories_per_label: &[usize]) -> Result<Graph> {
    let labels = g
        .edge_labels
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("graph has no categorical edge labels".into()))?;
    let width: usize = num_categories_per_label.iter().sum();
    let mut features = Array2::zeros((g.edges.len(), width));
    for (e, row) in labels.iter().enumerate() {
        if row.len() != num_categories_per_label.len() {
            return Err(Error::DimensionMismatch {
                expected: num_categories_per_label.len(),
                got: row.len(),
            });
        }
        let mut offset = 0;
        for (&value, &categories) in row.iter().zip(num_categories_per_label) {
            if value >= categories {
                return Err(Error::CategoryOutOfRange { value, categories });
            }
            features[[e, offset + value]] = 1.0;
            offset += categories;
        }
    }
    let mut out = g.clone();
    out.edge_features = Some(features);
    out.edge_labels = None;
    Ok(out)
}

/// Appends a zero-feature node connected to every original node.
///
/// Each new edge carries `1/|V|` in every edge-feature channel; graphs without
/// edge features are first given a single all-ones channel.
pub fn add_virtual_node(g: &Graph) -> Result<Graph> {
    if g.num_nodes == 0 {
        return Err(Error::Empty("graph has no nodes"));
    }
    if g.edge_labels.is_some() {
        return Err(Error::InvalidArgument(
            "one-hot encode edge labels before adding a virtual node".into(),
        ));
    }
    let n = g.num_nodes;
    let edge_features = g
        .edge_features
        .clone()
        .unwrap_or_else(|| Array2::ones((g.edges.len(), 1)));
    let e_dim = edge_features.ncols();

    let mut edges = g.edges.clone();
    edges.extend((0..n).map(|u| (u, n)));
    let virtual_rows = Array2::from_elem((n, e_dim), 1.0 / n as f64);
    let edge_features = ndarray::concatenate![Axis(0), edge_features, virtual_rows];
    let zero_row = Array2::zeros((1, g.node_feature_dim()));
    let node_features = ndarray::concatenate![Axis(0), g.node_features, zero_row];

    Ok(Graph {
        num_nodes: n + 1,
        edges,
        node_features,
        edge_features: Some(edge_features),
        edge_labels: None,
        label: g.label,
    })
}

/// A collection of graphs sharing feature dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub node_feature_dim: usize,
    pub edge_feature_dim: Option<usize>,
    /// Category counts of each categorical edge-label column, if the graphs
    /// carry categorical edge labels.
    pub edge_label_categories: Option<Vec<usize>>,
    pub num_classes: usize,
}

impl Dataset {
    /// Builds a dataset, inferring dimensions and the class count.
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>) -> Result<Self> {
        let node_feature_dim = graphs.first().map_or(0, Graph::node_feature_dim);
        let edge_feature_dim = graphs.first().and_then(Graph::edge_feature_dim);
        let edge_label_categories = graphs.first().and_then(|g| {
            g.edge_labels.as_ref().map(|_| {
                let cols = g.edge_labels.as_ref().and_then(|l| l.first()).map_or(0, Vec::len);
                let mut cats = vec![0usize; cols];
                for g in &graphs {
                    for row in g.edge_labels.iter().flatten() {
                        for (c, &v) in cats.iter_mut().zip(row) {
                            *c = (*c).max(v + 1);
                        }
                    }
                }
                cats
            })
        });
        let num_classes = graphs
            .iter()
            .filter_map(|g| g.label)
            .max()
            .map_or(0, |m| m + 1);
        let ds = Dataset {
            name: name.into(),
            graphs,
            node_feature_dim,
            edge_feature_dim,
            edge_label_categories,
            num_classes,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn labels(&self) -> Option<Vec<usize>> {
        self.graphs.iter().map(|g| g.label).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.graphs {
            g.validate()?;
            if g.node_feature_dim() != self.node_feature_dim {
                return Err(Error::Inconsistent(format!(
                    "node feature dims differ: {} vs {}",
                    g.node_feature_dim(),
                    self.node_feature_dim
                )));
            }
            if g.edge_feature_dim() != self.edge_feature_dim {
                return Err(Error::Inconsistent("edge feature dims differ".into()));
            }
            if g.edge_labels.is_some() != self.edge_label_categories.is_some() {
                return Err(Error::Inconsistent(
                    "edge labels present on some graphs only".into(),
                ));
            }
            if let Some(l) = g.label {
                if l >= self.num_classes {
                    return Err(Error::CategoryOutOfRange {
                        value: l,
                        categories: self.num_classes,
                    });
                }
            }
        }
        Ok(())
    }

    /// Replaces every graph's node features with degree features. The one-hot
    /// width is the dataset-wide maximum (clipped) degree plus one.
    pub fn with_degree_features(&self, mode: DegreeMode, clip: Option<usize>) -> Result<Self> {
        let max_degree = self
            .graphs
            .iter()
            .flat_map(|g| g.degrees())
            .map(|d| clip.map_or(d, |c| d.min(c)))
            .max()
            .unwrap_or(0);
        let graphs = self
            .graphs
            .iter()
            .map(|g| degree_features(g, mode, clip, max_degree))
            .collect::<Result<Vec<_>>>()?;
        self.rebuilt(graphs)
    }

    /// One-hot encodes the categorical edge labels of every graph.
    pub fn with_one_hot_edge_features(&self) -> Result<Self> {
        let cats = self
            .edge_label_categories
            .clone()
            .ok_or_else(|| Error::InvalidArgument("dataset has no edge labels".into()))?;
        let graphs = self
            .graphs
            .iter()
            .map(|g| one_hot_edge_features(g, &cats))
            .collect::<Result<Vec<_>>>()?;
        self.rebuilt(graphs)
    }

    pub fn with_virtual_nodes(&self) -> Result<Self> {
        let graphs = self
            .graphs
            .iter()
            .map(add_virtual_node)
            .collect::<Result<Vec<_>>>()?;
        self.rebuilt(graphs)
    }

    fn rebuilt(&self, graphs: Vec<Graph>) -> Result<Self> {
        let mut ds = Dataset::new(self.name.clone(), graphs)?;
        ds.num_classes = ds.num_classes.max(self.num_classes);
        if ds.edge_label_categories.is_some() {
            ds.edge_label_categories = self.edge_label_categories.clone();
        }
        Ok(ds)
    }
}
