//! Parameter-free node embedding by degree-normalized diffusion.
//!
//! Each round replaces a node's features with the normalized sum over its
//! neighbors and itself,
//! `x_v <- sum_{u in N(v) + v} w_uv / sqrt(deg(u) deg(v)) * x_u`,
//! and the per-round features are pooled per node into `z_v`.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::NodeEmbedding;

/// Per-node reduction of the layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// `[x^(0) || ... || x^(L)]`
    Concat,
    /// Mean over the `L + 1` layers.
    Average,
    /// `x^(L)`
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionConfig {
    pub num_layers: usize,
    pub pooling: Pooling,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            num_layers: 3,
            pooling: Pooling::Final,
        }
    }
}

impl DiffusionConfig {
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self.pooling {
            Pooling::Concat => (self.num_layers + 1) * input_dim,
            Pooling::Average | Pooling::Final => input_dim,
        }
    }
}

/// Feature matrices `x^(0) ..= x^(L)`, each `|V| x F`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<Array2<f64>>,
}

impl LayerStack {
    pub fn layers(&self) -> &[Array2<f64>] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len() - 1
    }
}

/// Sparse propagation operator; row `v` lists `(u, coefficient)` with the
/// self term first, then neighbors in edge order.
struct Operator {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Operator {
    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(x.raw_dim());
        for (v, row) in self.rows.iter().enumerate() {
            let mut acc = out.row_mut(v);
            for &(u, c) in row {
                acc.scaled_add(c, &x.row(u));
            }
        }
        out
    }

    fn propagate(&self, x0: &Array2<f64>, num_layers: usize) -> LayerStack {
        let mut layers = Vec::with_capacity(num_layers + 1);
        layers.push(x0.clone());
        for l in 0..num_layers {
            let next = self.apply(&layers[l]);
            layers.push(next);
        }
        LayerStack { layers }
    }
}

fn check_weights(weights: &Array2<f64>) -> Result<()> {
    match weights.iter().find(|w| !(**w >= 0.0)) {
        Some(&w) => Err(Error::NegativeWeight(w)),
        None => Ok(()),
    }
}

/// Scalar-weight operator. Degrees count neighbors plus the self-connection;
/// edge weights come from a single edge-feature channel, or are one.
fn scalar_operator(g: &Graph) -> Result<Operator> {
    let weights = match &g.edge_features {
        None => None,
        Some(f) if f.ncols() == 1 => {
            check_weights(f)?;
            Some(f.column(0).to_owned())
        }
        Some(f) => {
            return Err(Error::InvalidArgument(format!(
                "scalar diffusion needs one edge-feature channel, got {}",
                f.ncols()
            )))
        }
    };
    let deg: Vec<f64> = g.degrees().into_iter().map(|d| 1.0 + d as f64).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = (0..g.num_nodes)
        .map(|v| vec![(v, 1.0 / (deg[v] * deg[v]).sqrt())])
        .collect();
    for (e, &(u, v)) in g.edges.iter().enumerate() {
        let w = weights.as_ref().map_or(1.0, |w| w[e]);
        let c = w / (deg[u] * deg[v]).sqrt();
        rows[v].push((u, c));
        rows[u].push((v, c));
    }
    Ok(Operator { rows })
}

/// Sum of per-channel normalized operators. Channel degrees include the
/// all-ones self-connection.
fn multi_edge_operator(g: &Graph, weights: &Array2<f64>) -> Result<Operator> {
    check_weights(weights)?;
    let channels = weights.ncols();
    let mut deg = Array2::<f64>::ones((g.num_nodes, channels));
    for (e, &(u, v)) in g.edges.iter().enumerate() {
        for c in 0..channels {
            deg[[u, c]] += weights[[e, c]];
            deg[[v, c]] += weights[[e, c]];
        }
    }
    let mut rows: Vec<Vec<(usize, f64)>> = (0..g.num_nodes)
        .map(|v| {
            let coef = (0..channels).fold(0.0, |acc, c| acc + 1.0 / (deg[[v, c]] * deg[[v, c]]).sqrt());
            vec![(v, coef)]
        })
        .collect();
    for (e, &(u, v)) in g.edges.iter().enumerate() {
        let coef = (0..channels).fold(0.0, |acc, c| {
            acc + weights[[e, c]] / (deg[[u, c]] * deg[[v, c]]).sqrt()
        });
        rows[v].push((u, coef));
        rows[u].push((v, coef));
    }
    Ok(Operator { rows })
}

/// `L` rounds of scalar-weight diffusion from the graph's node features.
pub fn diffuse(g: &Graph, num_layers: usize) -> Result<LayerStack> {
    Ok(scalar_operator(g)?.propagate(&g.node_features, num_layers))
}

/// `L` rounds of diffusion over `E_dim` parallel edge channels. Graphs
/// without edge features use one all-ones channel.
pub fn diffuse_multi_edge(g: &Graph, num_layers: usize) -> Result<LayerStack> {
    let ones;
    let weights = match &g.edge_features {
        Some(f) => f,
        None => {
            ones = Array2::ones((g.edges.len(), 1));
            &ones
        }
    };
    Ok(multi_edge_operator(g, weights)?.propagate(&g.node_features, num_layers))
}

pub fn pool_nodes(stack: &LayerStack, mode: Pooling) -> NodeEmbedding {
    let layers = &stack.layers;
    match mode {
        Pooling::Concat => {
            let views: Vec<_> = layers.iter().map(Array2::view).collect();
            ndarray::concatenate(Axis(1), &views).expect("layers share a row count")
        }
        Pooling::Average => {
            let mut sum = layers[0].clone();
            for layer in &layers[1..] {
                sum += layer;
            }
            sum / layers.len() as f64
        }
        Pooling::Final => layers[layers.len() - 1].clone(),
    }
}

/// Diffuse and pool one graph. Graphs carrying edge features use the
/// multi-channel operator.
pub fn embed_nodes(g: &Graph, config: &DiffusionConfig) -> Result<NodeEmbedding> {
    let stack = if g.edge_features.is_some() {
        diffuse_multi_edge(g, config.num_layers)?
    } else {
        diffuse(g, config.num_layers)?
    };
    Ok(pool_nodes(&stack, config.pooling))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense `D^-1/2 (A + I) D^-1/2` with `D = 1 + neighbor count`.
    fn dense_operator(g: &Graph, weights: Option<&[f64]>) -> Array2<f64> {
        let n = g.num_nodes;
        let mut a = Array2::<f64>::eye(n);
        let mut count = vec![1.0f64; n];
        for (e, &(u, v)) in g.edges.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[e]);
            a[[u, v]] += w;
            a[[v, u]] += w;
            count[u] += 1.0;
            count[v] += 1.0;
        }
        Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] / (count[i] * count[j]).sqrt())
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, f: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        let x = Array2::from_shape_fn((n, f), |_| rng.gen_range(-1.0..1.0));
        Graph::from_edges(n, edges).unwrap().with_node_features(x).unwrap()
    }

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn isolated_node_is_fixed_point() {
        let g = Graph::from_edges(1, vec![])
            .unwrap()
            .with_node_features(array![[3.5, -1.0]])
            .unwrap();
        let stack = diffuse(&g, 5).unwrap();
        for layer in stack.layers() {
            assert_eq!(layer, &array![[3.5, -1.0]]);
        }
    }

    #[test]
    fn regular_graph_keeps_all_ones() {
        // 3-regular: the cube graph Q3
        let mut edges = Vec::new();
        for u in 0..8usize {
            for b in 0..3 {
                let v = u ^ (1 << b);
                if u < v {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::from_edges(8, edges)
            .unwrap()
            .with_node_features(Array2::ones((8, 2)))
            .unwrap();
        let stack = diffuse(&g, 4).unwrap();
        for layer in stack.layers() {
            assert!(layer.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn matches_dense_power_on_random_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_graph(&mut rng, 8, 0.4, 3);
        let s = dense_operator(&g, None);
        let expected = s.dot(&s).dot(&s).dot(&g.node_features);
        let stack = diffuse(&g, 3).unwrap();
        assert!(max_abs_diff(&stack.layers()[3], &expected) < 1e-12);
    }

    #[test]
    fn weighted_scalar_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let g = random_graph(&mut rng, 7, 0.5, 2);
        let w: Vec<f64> = (0..g.num_edges()).map(|_| rng.gen_range(0.0..2.0)).collect();
        let g = g
            .with_edge_features(Array2::from_shape_vec((w.len(), 1), w.clone()).unwrap())
            .unwrap();
        let s = dense_operator(&g, Some(&w));
        let expected = s.dot(&s).dot(&g.node_features);
        assert!(max_abs_diff(&diffuse(&g, 2).unwrap().layers()[2], &expected) < 1e-12);
    }

    #[test]
    fn negative_weight_rejected() {
        let mut g = Graph::from_edges(2, vec![(0, 1)]).unwrap();
        g.edge_features = Some(array![[-0.5]]);
        assert!(matches!(diffuse(&g, 1), Err(Error::NegativeWeight(_))));
        assert!(matches!(diffuse_multi_edge(&g, 1), Err(Error::NegativeWeight(_))));
    }

    #[test]
    fn multi_edge_all_ones_equals_scalar() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = random_graph(&mut rng, 10, 0.3, 2);
            let ones = g.clone().with_edge_features(Array2::ones((g.num_edges(), 1))).unwrap();
            let a = diffuse(&g, 4).unwrap();
            let b = diffuse_multi_edge(&ones, 4).unwrap();
            for (x, y) in a.layers().iter().zip(b.layers()) {
                assert!(max_abs_diff(x, y) <= 1e-15);
            }
        }
    }

    #[test]
    fn zero_channel_contributes_only_self_loop() {
        // channel 1 is zero on every real edge
        let g = Graph::from_edges(3, vec![(0, 1), (1, 2)])
            .unwrap()
            .with_node_features(array![[1.0], [2.0], [4.0]])
            .unwrap()
            .with_edge_features(array![[1.0, 0.0], [1.0, 0.0]])
            .unwrap();
        let only_ch0 = g.clone().with_edge_features(array![[1.0], [1.0]]).unwrap();
        let both = diffuse_multi_edge(&g, 1).unwrap();
        let ch0 = diffuse_multi_edge(&only_ch0, 1).unwrap();
        // second channel adds exactly x^(0) (deg_e = 1, self weight 1)
        let expected = &ch0.layers()[1] + &g.node_features;
        assert!(max_abs_diff(&both.layers()[1], &expected) < 1e-15);
    }

    #[test]
    fn multi_edge_matches_per_channel_oracle() {
        // 5-node graph with one-hot 4-channel edge features
        let edges = vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)];
        let labels = [0usize, 1, 0, 2, 3, 1];
        let mut ef = Array2::zeros((edges.len(), 4));
        for (e, &l) in labels.iter().enumerate() {
            ef[[e, l]] = 1.0;
        }
        let x0 = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, -1.0], [2.0, 0.0]];
        let g = Graph::from_edges(5, edges.clone())
            .unwrap()
            .with_node_features(x0.clone())
            .unwrap()
            .with_edge_features(ef.clone())
            .unwrap();

        let mut s = Array2::<f64>::zeros((5, 5));
        for c in 0..4 {
            let mut a = Array2::<f64>::eye(5);
            for (e, &(u, v)) in edges.iter().enumerate() {
                a[[u, v]] += ef[[e, c]];
                a[[v, u]] += ef[[e, c]];
            }
            let deg: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
            s = s + Array2::from_shape_fn((5, 5), |(i, j)| a[[i, j]] / (deg[i] * deg[j]).sqrt());
        }
        let expected = s.dot(&s).dot(&x0);
        let got = diffuse_multi_edge(&g, 2).unwrap();
        assert!(max_abs_diff(&got.layers()[2], &expected) < 1e-12);
    }

    #[test]
    fn pooling_modes() {
        let g = Graph::from_edges(3, vec![(0, 1)])
            .unwrap()
            .with_node_features(array![[1.0, 2.0, 3.0], [0.0, 1.0, 0.0], [5.0, 5.0, 5.0]])
            .unwrap();
        let l0 = diffuse(&g, 0).unwrap();
        for mode in [Pooling::Concat, Pooling::Average, Pooling::Final] {
            assert_eq!(pool_nodes(&l0, mode), g.node_features);
        }
        let l2 = diffuse(&g, 2).unwrap();
        assert_eq!(pool_nodes(&l2, Pooling::Concat).ncols(), 9);
        let cfg = DiffusionConfig {
            num_layers: 2,
            pooling: Pooling::Concat,
        };
        assert_eq!(cfg.output_dim(3), 9);
        // node 2 is isolated, so its layers are identical
        let avg = pool_nodes(&l2, Pooling::Average);
        assert_eq!(avg.row(2).to_vec(), vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn disconnected_components_do_not_mix() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_graph(&mut rng, 5, 0.6, 2);
        let b = random_graph(&mut rng, 4, 0.6, 2);
        let mut edges = a.edges.clone();
        edges.extend(b.edges.iter().map(|&(u, v)| (u + 5, v + 5)));
        let x = ndarray::concatenate![Axis(0), a.node_features, b.node_features];
        let joint = Graph::from_edges(9, edges).unwrap().with_node_features(x).unwrap();
        let ja = diffuse(&joint, 3).unwrap();
        let (sa, sb) = (diffuse(&a, 3).unwrap(), diffuse(&b, 3).unwrap());
        let top = ja.layers()[3].slice(ndarray::s![..5, ..]).to_owned();
        let bottom = ja.layers()[3].slice(ndarray::s![5.., ..]).to_owned();
        assert!(max_abs_diff(&top, &sa.layers()[3]) < 1e-15);
        assert!(max_abs_diff(&bottom, &sb.layers()[3]) < 1e-15);
    }

    proptest! {
        #[test]
        fn permutation_equivariance(seed in 0u64..1000, n in 1usize..12, layers in 0usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(&mut rng, n, 0.35, 3);
            let mut perm: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let cfg = DiffusionConfig { num_layers: layers, pooling: Pooling::Concat };
            let z = embed_nodes(&g, &cfg).unwrap();
            let zp = embed_nodes(&g.permuted(&perm).unwrap(), &cfg).unwrap();
            for v in 0..n {
                for (a, b) in z.row(v).iter().zip(zp.row(perm[v]).iter()) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
