//! TU Dortmund benchmark text format.
//!
//! A dataset `NAME` lives in one directory as
//! `NAME_A.txt` (1-indexed `u, v` edge lines), `NAME_graph_indicator.txt`,
//! `NAME_graph_labels.txt` and optionally `NAME_node_labels.txt`,
//! `NAME_node_attributes.txt`, `NAME_edge_labels.txt`,
//! `NAME_edge_attributes.txt`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{Dataset, Graph};
use crate::error::{Error, Result};

fn file_path(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

fn read_lines(path: &Path, required: bool) -> Result<Option<Vec<String>>> {
    if !path.exists() {
        return if required {
            Err(Error::MissingFile(path.to_path_buf()))
        } else {
            Ok(None)
        };
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(Some(
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect(),
    ))
}

fn parse_row<T: std::str::FromStr>(path: &Path, line_no: usize, line: &str) -> Result<Vec<T>> {
    line.split(',')
        .map(|tok| {
            tok.trim().parse::<T>().map_err(|_| Error::Parse {
                file: path.display().to_string(),
                line: line_no + 1,
                msg: format!("cannot parse {:?}", tok.trim()),
            })
        })
        .collect()
}

fn parse_column<T: std::str::FromStr>(path: &Path, lines: &[String]) -> Result<Vec<T>> {
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut row = parse_row::<T>(path, i, l)?;
            if row.len() != 1 {
                return Err(Error::Parse {
                    file: path.display().to_string(),
                    line: i + 1,
                    msg: format!("expected one value, got {}", row.len()),
                });
            }
            Ok(row.remove(0))
        })
        .collect()
}

/// Maps each distinct value to its rank among the sorted distinct values.
fn dense_codes(values: &[i64]) -> (Vec<usize>, usize) {
    let distinct: BTreeMap<i64, usize> = values
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    (values.iter().map(|v| distinct[v]).collect(), distinct.len())
}

/// Parses a TUD-format dataset.
///
/// Node labels are one-hot encoded into the node features, followed by any
/// continuous node attributes. Edge labels stay categorical; edge attributes
/// become edge features. Both directions of an edge collapse to one
/// undirected edge keeping the first occurrence's labels.
pub fn parse_tud(directory: impl AsRef<Path>, dataset_name: &str) -> Result<Dataset> {
    let dir = directory.as_ref();
    let a_path = file_path(dir, dataset_name, "A");
    let ind_path = file_path(dir, dataset_name, "graph_indicator");
    let gl_path = file_path(dir, dataset_name, "graph_labels");
    let nl_path = file_path(dir, dataset_name, "node_labels");
    let na_path = file_path(dir, dataset_name, "node_attributes");
    let el_path = file_path(dir, dataset_name, "edge_labels");
    let ea_path = file_path(dir, dataset_name, "edge_attributes");

    let a_lines = read_lines(&a_path, true)?.unwrap_or_default();
    let indicator: Vec<usize> = parse_column(&ind_path, &read_lines(&ind_path, true)?.unwrap_or_default())?;
    let graph_labels: Vec<i64> = parse_column(&gl_path, &read_lines(&gl_path, true)?.unwrap_or_default())?;

    let total_nodes = indicator.len();
    let num_graphs = graph_labels.len();
    if indicator.iter().any(|&g| g == 0 || g > num_graphs) {
        return Err(Error::Inconsistent(format!(
            "graph indicator references graphs outside 1..={num_graphs}"
        )));
    }

    // Global node -> (graph, local index).
    let mut local = Vec::with_capacity(total_nodes);
    let mut sizes = vec![0usize; num_graphs];
    for &g in &indicator {
        local.push(sizes[g - 1]);
        sizes[g - 1] += 1;
    }

    let mut node_features: Vec<Array2<f64>> = sizes.iter().map(|&n| Array2::zeros((n, 0))).collect();
    if let Some(lines) = read_lines(&nl_path, false)? {
        let raw: Vec<i64> = parse_column(&nl_path, &lines)?;
        if raw.len() != total_nodes {
            return Err(Error::Inconsistent(format!(
                "{} node labels for {} nodes",
                raw.len(),
                total_nodes
            )));
        }
        let (codes, cats) = dense_codes(&raw);
        node_features = sizes.iter().map(|&n| Array2::zeros((n, cats))).collect();
        for (v, &c) in codes.iter().enumerate() {
            node_features[indicator[v] - 1][[local[v], c]] = 1.0;
        }
    }
    if let Some(lines) = read_lines(&na_path, false)? {
        if lines.len() != total_nodes {
            return Err(Error::Inconsistent(format!(
                "{} node attribute rows for {} nodes",
                lines.len(),
                total_nodes
            )));
        }
        let rows = lines
            .iter()
            .enumerate()
            .map(|(i, l)| parse_row::<f64>(&na_path, i, l))
            .collect::<Result<Vec<_>>>()?;
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Inconsistent("ragged node attributes".into()));
        }
        let offset = node_features.first().map_or(0, |f| f.ncols());
        let mut widened: Vec<Array2<f64>> = node_features
            .iter()
            .map(|f| {
                let mut w = Array2::zeros((f.nrows(), offset + width));
                w.slice_mut(ndarray::s![.., ..offset]).assign(f);
                w
            })
            .collect();
        for (v, row) in rows.iter().enumerate() {
            for (c, &x) in row.iter().enumerate() {
                widened[indicator[v] - 1][[local[v], offset + c]] = x;
            }
        }
        node_features = widened;
    }

    let edge_label_rows = match read_lines(&el_path, false)? {
        Some(lines) => {
            if lines.len() != a_lines.len() {
                return Err(Error::Inconsistent(format!(
                    "{} edge labels for {} edge lines",
                    lines.len(),
                    a_lines.len()
                )));
            }
            Some(
                lines
                    .iter()
                    .enumerate()
                    .map(|(i, l)| parse_row::<i64>(&el_path, i, l))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        None => None,
    };
    let edge_attr_rows = match read_lines(&ea_path, false)? {
        Some(lines) => {
            if lines.len() != a_lines.len() {
                return Err(Error::Inconsistent(format!(
                    "{} edge attribute rows for {} edge lines",
                    lines.len(),
                    a_lines.len()
                )));
            }
            Some(
                lines
                    .iter()
                    .enumerate()
                    .map(|(i, l)| parse_row::<f64>(&ea_path, i, l))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        None => None,
    };

    // Dense codes per edge-label column.
    let (edge_codes, edge_categories) = match &edge_label_rows {
        Some(rows) => {
            let cols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != cols) {
                return Err(Error::Inconsistent("ragged edge labels".into()));
            }
            let mut codes = vec![Vec::with_capacity(cols); rows.len()];
            let mut cats = Vec::with_capacity(cols);
            for c in 0..cols {
                let column: Vec<i64> = rows.iter().map(|r| r[c]).collect();
                let (col_codes, n) = dense_codes(&column);
                for (row, code) in codes.iter_mut().zip(col_codes) {
                    row.push(code);
                }
                cats.push(n);
            }
            (Some(codes), Some(cats))
        }
        None => (None, None),
    };

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    let mut first_line: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
    let mut seen: Vec<HashSet<(usize, usize)>> = vec![HashSet::new(); num_graphs];
    for (i, line) in a_lines.iter().enumerate() {
        let pair = parse_row::<usize>(&a_path, i, line)?;
        if pair.len() != 2 {
            return Err(Error::Parse {
                file: a_path.display().to_string(),
                line: i + 1,
                msg: "expected `u, v`".into(),
            });
        }
        for &w in &pair {
            if w == 0 || w > total_nodes {
                return Err(Error::NodeIndexOutOfRange {
                    index: w,
                    num_nodes: total_nodes,
                });
            }
        }
        let (u, v) = (pair[0] - 1, pair[1] - 1);
        let g = indicator[u] - 1;
        if indicator[v] - 1 != g {
            return Err(Error::Inconsistent(format!(
                "edge line {} joins nodes of different graphs",
                i + 1
            )));
        }
        if u == v {
            continue;
        }
        let (lu, lv) = (local[u], local[v]);
        let key = (lu.min(lv), lu.max(lv));
        if seen[g].insert(key) {
            edges[g].push((lu, lv));
            first_line[g].push(i);
        }
    }

    let (class_codes, _) = dense_codes(&graph_labels);
    let mut graphs = Vec::with_capacity(num_graphs);
    for g in 0..num_graphs {
        let edge_features = edge_attr_rows.as_ref().map(|rows| {
            let width = rows.first().map_or(0, Vec::len);
            Array2::from_shape_fn((first_line[g].len(), width), |(e, c)| rows[first_line[g][e]][c])
        });
        let edge_labels = edge_codes
            .as_ref()
            .map(|codes| first_line[g].iter().map(|&i| codes[i].clone()).collect());
        let graph = Graph {
            num_nodes: sizes[g],
            edges: std::mem::take(&mut edges[g]),
            node_features: std::mem::replace(&mut node_features[g], Array2::zeros((0, 0))),
            edge_features,
            edge_labels,
            label: Some(class_codes[g]),
        };
        graphs.push(graph);
    }
    let mut ds = Dataset::new(dataset_name, graphs)?;
    ds.edge_label_categories = edge_categories;
    Ok(ds)
}

fn write_file(path: PathBuf, body: String) -> Result<()> {
    fs::write(&path, body).map_err(|e| Error::io(path, e))
}

fn join_floats(row: ndarray::ArrayView1<f64>) -> String {
    row.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Writes a dataset in TUD format. Node features are written as
/// `node_attributes`, edge features as `edge_attributes`, and both
/// directions of every edge are listed.
pub fn write_tud(dataset: &Dataset, directory: impl AsRef<Path>) -> Result<()> {
    let dir = directory.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = &dataset.name;

    let (mut a, mut ind, mut gl, mut na, mut el, mut ea) =
        (String::new(), String::new(), String::new(), String::new(), String::new(), String::new());
    let mut offset = 0;
    for (gi, g) in dataset.graphs.iter().enumerate() {
        for v in 0..g.num_nodes {
            let _ = writeln!(ind, "{}", gi + 1);
            if dataset.node_feature_dim > 0 {
                let _ = writeln!(na, "{}", join_floats(g.node_features.row(v)));
            }
        }
        for (e, &(u, v)) in g.edges.iter().enumerate() {
            for (x, y) in [(u, v), (v, u)] {
                let _ = writeln!(a, "{}, {}", offset + x + 1, offset + y + 1);
                if let Some(labels) = &g.edge_labels {
                    let row: Vec<String> = labels[e].iter().map(usize::to_string).collect();
                    let _ = writeln!(el, "{}", row.join(", "));
                }
                if let Some(f) = &g.edge_features {
                    let _ = writeln!(ea, "{}", join_floats(f.row(e)));
                }
            }
        }
        let _ = writeln!(gl, "{}", g.label.unwrap_or(0));
        offset += g.num_nodes;
    }
    write_file(file_path(dir, name, "A"), a)?;
    write_file(file_path(dir, name, "graph_indicator"), ind)?;
    write_file(file_path(dir, name, "graph_labels"), gl)?;
    if dataset.node_feature_dim > 0 {
        write_file(file_path(dir, name, "node_attributes"), na)?;
    }
    if dataset.edge_label_categories.is_some() {
        write_file(file_path(dir, name, "edge_labels"), el)?;
    }
    if dataset.edge_feature_dim.is_some() {
        write_file(file_path(dir, name, "edge_attributes"), ea)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, suffix: &str, body: &str) {
        fs::write(file_path(dir, name, suffix), body).unwrap();
    }

    fn two_triangles(dir: &Path) {
        write(dir, "T", "A", "1, 2\n2, 3\n3, 1\n4, 5\n5, 6\n6, 4\n");
        write(dir, "T", "graph_indicator", "1\n1\n1\n2\n2\n2\n");
        write(dir, "T", "graph_labels", "-1\n1\n");
    }

    #[test]
    fn parses_two_triangles() {
        let tmp = tempfile::tempdir().unwrap();
        two_triangles(tmp.path());
        let ds = parse_tud(tmp.path(), "T").unwrap();
        assert_eq!(ds.len(), 2);
        for g in &ds.graphs {
            assert_eq!(g.num_nodes, 3);
            assert_eq!(g.num_edges(), 3);
        }
        assert_eq!(ds.labels().unwrap(), vec![0, 1]);
        assert_eq!(ds.num_classes, 2);
    }

    #[test]
    fn collapses_both_directions() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "D", "A", "1, 2\n2, 1\n2, 3\n");
        write(tmp.path(), "D", "graph_indicator", "1\n1\n1\n");
        write(tmp.path(), "D", "graph_labels", "0\n");
        write(tmp.path(), "D", "edge_labels", "2\n2\n0\n");
        let ds = parse_tud(tmp.path(), "D").unwrap();
        assert_eq!(ds.graphs[0].edges, vec![(0, 1), (1, 2)]);
        assert_eq!(ds.graphs[0].edge_labels, Some(vec![vec![1], vec![0]]));
        assert_eq!(ds.edge_label_categories, Some(vec![2]));
    }

    #[test]
    fn node_labels_become_one_hot_then_attributes() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "N", "A", "1, 2\n");
        write(tmp.path(), "N", "graph_indicator", "1\n1\n");
        write(tmp.path(), "N", "graph_labels", "3\n");
        write(tmp.path(), "N", "node_labels", "5\n2\n");
        write(tmp.path(), "N", "node_attributes", "0.5, 1.5\n-2.0, 3.0\n");
        let ds = parse_tud(tmp.path(), "N").unwrap();
        assert_eq!(ds.node_feature_dim, 4);
        assert_eq!(ds.graphs[0].node_features.row(0).to_vec(), vec![0.0, 1.0, 0.5, 1.5]);
        assert_eq!(ds.graphs[0].node_features.row(1).to_vec(), vec![1.0, 0.0, -2.0, 3.0]);
    }

    #[test]
    fn zero_index_is_out_of_range() {
        let tmp = tempfile::tempdir().unwrap();
        two_triangles(tmp.path());
        write(tmp.path(), "T", "A", "0, 2\n");
        let err = parse_tud(tmp.path(), "T").unwrap_err();
        assert!(matches!(err, Error::NodeIndexOutOfRange { index: 0, .. }));
    }

    #[test]
    fn missing_required_file() {
        let tmp = tempfile::tempdir().unwrap();
        two_triangles(tmp.path());
        fs::remove_file(file_path(tmp.path(), "T", "graph_labels")).unwrap();
        assert!(matches!(parse_tud(tmp.path(), "T"), Err(Error::MissingFile(_))));
    }

    #[test]
    fn short_indicator_is_detected() {
        let tmp = tempfile::tempdir().unwrap();
        two_triangles(tmp.path());
        write(tmp.path(), "T", "graph_indicator", "1\n1\n1\n2\n2\n");
        assert!(matches!(
            parse_tud(tmp.path(), "T"),
            Err(Error::NodeIndexOutOfRange { index: 6, .. })
        ));
    }

    #[test]
    fn node_label_count_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        two_triangles(tmp.path());
        write(tmp.path(), "T", "node_labels", "0\n1\n");
        assert!(matches!(parse_tud(tmp.path(), "T"), Err(Error::Inconsistent(_))));
    }
}
