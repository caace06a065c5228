//! Generic JSON graph format:
//! `{"graphs":[{"num_nodes":n,"edges":[[u,v],...],"node_features":[[...]],"edge_features":[[...]],"label":c}]}`.
//!
//! `name`, `num_classes` and per-graph `edge_labels` are accepted as optional
//! extensions.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, Graph};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct JsonDataset {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    num_classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_label_categories: Option<Vec<usize>>,
    graphs: Vec<JsonGraph>,
}

#[derive(Serialize, Deserialize)]
struct JsonGraph {
    num_nodes: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_labels: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
}

fn to_matrix(rows: &[Vec<f64>], nrows: usize) -> Result<Array2<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.len() != nrows {
        return Err(Error::DimensionMismatch {
            expected: nrows,
            got: rows.len(),
        });
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Inconsistent("ragged feature matrix".into()));
    }
    Ok(Array2::from_shape_fn((nrows, width), |(i, j)| rows[i][j]))
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

impl TryFrom<JsonGraph> for Graph {
    type Error = Error;

    fn try_from(j: JsonGraph) -> Result<Graph> {
        let edges: Vec<(usize, usize)> = j.edges.iter().map(|e| (e[0], e[1])).collect();
        let node_features = match &j.node_features {
            Some(rows) => to_matrix(rows, j.num_nodes)?,
            None => Array2::zeros((j.num_nodes, 0)),
        };
        let edge_features = j
            .edge_features
            .as_ref()
            .map(|rows| to_matrix(rows, edges.len()))
            .transpose()?;
        let g = Graph {
            num_nodes: j.num_nodes,
            edges,
            node_features,
            edge_features,
            edge_labels: j.edge_labels,
            label: j.label,
        };
        g.validate()?;
        Ok(g)
    }
}

impl From<&Graph> for JsonGraph {
    fn from(g: &Graph) -> JsonGraph {
        JsonGraph {
            num_nodes: g.num_nodes,
            edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
            node_features: (g.node_feature_dim() > 0).then(|| to_rows(&g.node_features)),
            edge_features: g.edge_features.as_ref().map(to_rows),
            edge_labels: g.edge_labels.clone(),
            label: g.label,
        }
    }
}

/// Parses a dataset from JSON text.
pub fn dataset_from_json(text: &str, default_name: &str) -> Result<Dataset> {
    let parsed: JsonDataset = serde_json::from_str(text)?;
    let graphs = parsed
        .graphs
        .into_iter()
        .map(Graph::try_from)
        .collect::<Result<Vec<_>>>()?;
    let mut ds = Dataset::new(parsed.name.unwrap_or_else(|| default_name.to_owned()), graphs)?;
    if let Some(c) = parsed.num_classes {
        if c < ds.num_classes {
            return Err(Error::Inconsistent(format!(
                "num_classes {c} is below the largest label"
            )));
        }
        ds.num_classes = c;
    }
    if parsed.edge_label_categories.is_some() {
        ds.edge_label_categories = parsed.edge_label_categories;
        ds.validate()?;
    }
    Ok(ds)
}

pub fn dataset_to_json(ds: &Dataset) -> Result<String> {
    let j = JsonDataset {
        name: Some(ds.name.clone()),
        num_classes: Some(ds.num_classes),
        edge_label_categories: ds.edge_label_categories.clone(),
        graphs: ds.graphs.iter().map(JsonGraph::from).collect(),
    };
    Ok(serde_json::to_string(&j)?)
}

/// Reads a JSON dataset file. The file stem is the default dataset name.
pub fn read_json(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset");
    dataset_from_json(&text, stem)
}

pub fn write_json(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset_to_json(ds)?).map_err(|e| Error::io(path, e))
}
