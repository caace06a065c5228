//! Transportation simplex for uniform marginals.
//!
//! Row `j` supplies `n` units and column `k` demands `m` units, so every
//! basic solution is integral and degeneracy is detected exactly. Plans are
//! rescaled to probability mass by `1 / (m n)` at the end.
//!
//! The basis is a spanning tree over the `m + n` row and column nodes.
//! Entering cells are priced with the most negative reduced cost (ties to
//! the lowest flat index); after a run of degenerate pivots the solver
//! switches to Bland's rule until the objective strictly decreases again.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN: usize = 8;

pub(crate) struct Solution {
    /// Integral flows, row-major `m x n`, summing to `m n`.
    pub flow: Vec<u64>,
}

struct Tree {
    m: usize,
    n: usize,
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    order: Vec<usize>,
}

impl Tree {
    fn new(m: usize, n: usize) -> Self {
        let nodes = m + n;
        Tree {
            m,
            n,
            adj: vec![Vec::new(); nodes],
            parent: vec![usize::MAX; nodes],
            depth: vec![0; nodes],
            potential: vec![0.0; nodes],
            order: Vec::with_capacity(nodes),
        }
    }

    fn link(&mut self, row: usize, col: usize) {
        let c = self.m + col;
        self.adj[row].push(c);
        self.adj[c].push(row);
    }

    fn unlink(&mut self, row: usize, col: usize) {
        let c = self.m + col;
        self.adj[row].retain(|&x| x != c);
        self.adj[c].retain(|&x| x != row);
    }

    fn cell(&self, a: usize, b: usize) -> (usize, usize) {
        if a < self.m {
            (a, b - self.m)
        } else {
            (b, a - self.m)
        }
    }

    /// Recomputes parents, depths and dual potentials with row 0 as root
    /// (`u_0 = 0`, `u_r + v_c = cost` on every basic cell).
    fn refresh(&mut self, cost: &Array2<f64>) {
        self.order.clear();
        self.parent[0] = 0;
        self.depth[0] = 0;
        self.potential[0] = 0.0;
        self.order.push(0);
        let mut head = 0;
        while head < self.order.len() {
            let a = self.order[head];
            head += 1;
            for i in 0..self.adj[a].len() {
                let b = self.adj[a][i];
                if b == self.parent[a] && a != 0 {
                    continue;
                }
                let (r, c) = self.cell(a, b);
                self.parent[b] = a;
                self.depth[b] = self.depth[a] + 1;
                self.potential[b] = cost[[r, c]] - self.potential[a];
                self.order.push(b);
            }
        }
        debug_assert_eq!(self.order.len(), self.m + self.n, "basis is not a spanning tree");
    }

    /// Tree path from column node `col` to row node `row`.
    fn path(&self, row: usize, col: usize) -> Vec<usize> {
        let (mut a, mut b) = (self.m + col, row);
        let mut left = vec![a];
        let mut right = vec![b];
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
                left.push(a);
            } else {
                b = self.parent[b];
                right.push(b);
            }
        }
        right.pop();
        left.extend(right.into_iter().rev());
        left
    }
}

/// Northwest-corner basis: exactly `m + n - 1` cells, zero-flow cells where
/// a row and a column are exhausted together.
fn northwest_corner(m: usize, n: usize, flow: &mut [u64], basic: &mut [bool], tree: &mut Tree) {
    let mut supply = vec![n as u64; m];
    let mut demand = vec![m as u64; n];
    let (mut r, mut c) = (0, 0);
    loop {
        let x = supply[r].min(demand[c]);
        flow[r * n + c] = x;
        basic[r * n + c] = true;
        tree.link(r, c);
        supply[r] -= x;
        demand[c] -= x;
        if r == m - 1 && c == n - 1 {
            break;
        }
        if supply[r] == 0 && r < m - 1 {
            r += 1;
        } else {
            c += 1;
        }
    }
}

pub(crate) fn solve(cost: &Array2<f64>) -> Result<Solution> {
    let (m, n) = cost.dim();
    let scale = cost.iter().fold(1.0f64, |a, &c| a.max(c.abs()));
    let tol = 1e-12 * scale;
    let max_pivots = 1000 + 50 * (m + n) * m.max(n);

    let mut flow = vec![0u64; m * n];
    let mut basic = vec![false; m * n];
    let mut tree = Tree::new(m, n);
    northwest_corner(m, n, &mut flow, &mut basic, &mut tree);

    let mut degenerate_run = 0usize;
    let mut pivots = 0usize;
    loop {
        tree.refresh(cost);
        let bland = degenerate_run >= DEGENERATE_RUN;

        let mut entering = None;
        let mut best = -tol;
        'scan: for r in 0..m {
            let u = tree.potential[r];
            for c in 0..n {
                let idx = r * n + c;
                if basic[idx] {
                    continue;
                }
                let reduced = cost[[r, c]] - u - tree.potential[m + c];
                if reduced < best {
                    entering = Some((r, c));
                    if bland {
                        break 'scan;
                    }
                    best = reduced;
                }
            }
        }
        let Some((er, ec)) = entering else {
            return Ok(Solution { flow });
        };
        if pivots >= max_pivots {
            return Err(Error::NotConverged(pivots));
        }
        pivots += 1;

        // Edges along the column-to-row path alternate -, +, -, ...
        let path = tree.path(er, ec);
        let mut theta = u64::MAX;
        let mut leaving = usize::MAX;
        for (i, w) in path.windows(2).enumerate() {
            if i % 2 == 0 {
                let (r, c) = tree.cell(w[0], w[1]);
                let idx = r * n + c;
                let f = flow[idx];
                if f < theta || (f == theta && idx < leaving) {
                    theta = f;
                    leaving = idx;
                }
            }
        }
        for (i, w) in path.windows(2).enumerate() {
            let (r, c) = tree.cell(w[0], w[1]);
            let idx = r * n + c;
            if i % 2 == 0 {
                flow[idx] -= theta;
            } else {
                flow[idx] += theta;
            }
        }
        let eidx = er * n + ec;
        flow[eidx] = theta;
        basic[eidx] = true;
        tree.link(er, ec);
        basic[leaving] = false;
        tree.unlink(leaving / n, leaving % n);

        degenerate_run = if theta == 0 { degenerate_run + 1 } else { 0 };
    }
}
