//! Sparse symmetric graph Laplacians and the conjugate-gradient solve.
//!
//! The graph is stored in compressed sparse row form over undirected
//! edges (each edge appears in both rows). Dirichlet constraints are
//! eliminated by projection: constrained entries are folded into the
//! right-hand side once and the Krylov vectors live in the free
//! subspace, so constraints hold exactly. All reductions run in index
//! order, which makes solves bit-reproducible.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::GscError;
use crate::math;
use crate::Result;

/// Edge conductances: one scalar for translation-invariant lattices,
/// or one value per CSR entry for custom graphs.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeWeights {
    Uniform(f64),
    PerEntry(Vec<f64>),
}

/// Undirected weighted graph in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrGraph {
    row_ptr: Vec<u32>,
    cols: Vec<u32>,
    weights: EdgeWeights,
}

impl CsrGraph {
    pub fn new(row_ptr: Vec<u32>, cols: Vec<u32>, weights: EdgeWeights) -> Self {
        debug_assert!(!row_ptr.is_empty());
        debug_assert_eq!(*row_ptr.last().unwrap() as usize, cols.len());
        if let EdgeWeights::PerEntry(w) = &weights {
            debug_assert_eq!(w.len(), cols.len());
        }
        CsrGraph { row_ptr, cols, weights }
    }

    /// Build from an undirected edge list; nodes are `0..n`.
    pub fn from_edges(n: usize, edges: &[(u32, u32, f64)]) -> Self {
        let mut counts = vec![0u32; n + 1];
        for &(u, v, _) in edges {
            counts[u as usize + 1] += 1;
            counts[v as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut cols = vec![0u32; edges.len() * 2];
        let mut w = vec![0f64; edges.len() * 2];
        let mut cursor = row_ptr.clone();
        for &(u, v, c) in edges {
            let cu = cursor[u as usize] as usize;
            cols[cu] = v;
            w[cu] = c;
            cursor[u as usize] += 1;
            let cv = cursor[v as usize] as usize;
            cols[cv] = u;
            w[cv] = c;
            cursor[v as usize] += 1;
        }
        // deterministic entry order within each row
        for i in 0..n {
            let (lo, hi) = (row_ptr[i] as usize, row_ptr[i + 1] as usize);
            let mut pairs: Vec<(u32, f64)> =
                cols[lo..hi].iter().copied().zip(w[lo..hi].iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.cmp(&b.0));
            for (j, (c, x)) in pairs.into_iter().enumerate() {
                cols[lo + j] = c;
                w[lo + j] = x;
            }
        }
        CsrGraph { row_ptr, cols, weights: EdgeWeights::PerEntry(w) }
    }

    pub fn node_count(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn entry_count(&self) -> usize {
        self.cols.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.cols.len() / 2
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        let (lo, hi) = (self.row_ptr[v as usize] as usize, self.row_ptr[v as usize + 1] as usize);
        &self.cols[lo..hi]
    }

    #[inline]
    pub fn entry_weight(&self, entry: usize) -> f64 {
        match &self.weights {
            EdgeWeights::Uniform(c) => *c,
            EdgeWeights::PerEntry(w) => w[entry],
        }
    }

    /// Sum of incident conductances (the Laplacian diagonal).
    pub fn weighted_degree(&self, v: u32) -> f64 {
        let (lo, hi) = (self.row_ptr[v as usize] as usize, self.row_ptr[v as usize + 1] as usize);
        match &self.weights {
            EdgeWeights::Uniform(c) => (hi - lo) as f64 * c,
            EdgeWeights::PerEntry(w) => w[lo..hi].iter().sum(),
        }
    }

    /// Visit each undirected edge once as (u, v, conductance), u < v,
    /// in row order.
    pub fn for_each_edge<F: FnMut(u32, u32, f64)>(&self, mut f: F) {
        for u in 0..self.node_count() as u32 {
            let (lo, hi) = (self.row_ptr[u as usize] as usize, self.row_ptr[u as usize + 1] as usize);
            for e in lo..hi {
                let v = self.cols[e];
                if v > u {
                    f(u, v, self.entry_weight(e));
                }
            }
        }
    }

    /// y = L x, optionally with an extra diagonal term.
    pub fn apply_laplacian(&self, x: &[f64], extra_diag: Option<&[f64]>, y: &mut [f64]) {
        let n = self.node_count();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        match &self.weights {
            EdgeWeights::Uniform(c) => {
                for i in 0..n {
                    let (lo, hi) = (self.row_ptr[i] as usize, self.row_ptr[i + 1] as usize);
                    let mut acc = (hi - lo) as f64 * x[i];
                    for e in lo..hi {
                        acc -= x[self.cols[e] as usize];
                    }
                    y[i] = acc * c;
                }
            }
            EdgeWeights::PerEntry(w) => {
                for i in 0..n {
                    let (lo, hi) = (self.row_ptr[i] as usize, self.row_ptr[i + 1] as usize);
                    let mut acc = 0.0;
                    for e in lo..hi {
                        acc += w[e] * (x[i] - x[self.cols[e] as usize]);
                    }
                    y[i] = acc;
                }
            }
        }
        if let Some(d) = extra_diag {
            for i in 0..n {
                y[i] += d[i] * x[i];
            }
        }
    }

    /// Dirichlet energy of a node function over the edges.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        self.for_each_edge(|u, v, c| {
            let d = x[u as usize] - x[v as usize];
            total += c * d * d;
        });
        total
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0u32];
        seen[0] = true;
        let mut count = 1usize;
        while let Some(v) = stack.pop() {
            for &u in self.neighbors(v) {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == n
    }
}

/// A Laplacian system with Dirichlet constraints and optional grounded
/// diagonal terms (edges to an external potential).
pub struct DirichletSystem<'a> {
    pub graph: &'a CsrGraph,
    /// true = value pinned
    pub fixed: Vec<bool>,
    /// pinned values where fixed, initial guess elsewhere
    pub values: Vec<f64>,
    /// conductance to an external potential, added to the diagonal
    pub extra_diag: Vec<f64>,
    /// conductance times external potential, added to the rhs
    pub rhs: Vec<f64>,
}

impl<'a> DirichletSystem<'a> {
    pub fn new(graph: &'a CsrGraph) -> Self {
        let n = graph.node_count();
        DirichletSystem {
            graph,
            fixed: vec![false; n],
            values: vec![0.0; n],
            extra_diag: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }

    pub fn pin(&mut self, node: u32, value: f64) {
        self.fixed[node as usize] = true;
        self.values[node as usize] = value;
    }

    /// Attach a grounded edge `conductance * (potential - x)` at `node`.
    pub fn ground(&mut self, node: u32, conductance: f64, potential: f64) {
        self.extra_diag[node as usize] += conductance;
        self.rhs[node as usize] += conductance * potential;
    }
}

/// Solver knobs. `tol` is relative to the right-hand-side norm of the
/// reduced system; `max_iter` of 0 means the default cap of
/// `50 * sqrt(node count)`.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub residual: f64,
    pub iterations: u32,
}

/// Jacobi-preconditioned conjugate gradients on the free subspace.
pub fn solve_cg(system: &DirichletSystem<'_>, opts: SolveOptions) -> Result<(Vec<f64>, SolveStats)> {
    let graph = system.graph;
    let n = graph.node_count();
    let any_fixed = system.fixed.iter().any(|&f| f);
    let any_ground = system.extra_diag.iter().any(|&d| d > 0.0);
    if !any_fixed && !any_ground {
        return Err(GscError::SingularSystem);
    }

    let max_iter = if opts.max_iter > 0 {
        opts.max_iter
    } else {
        (50.0 * math::sqrt(n as f64)) as u32 + 1
    };

    // rhs of the reduced system: external terms minus coupling to pins
    let mut x = system.values.clone();
    let mut pinned = vec![0.0; n];
    for i in 0..n {
        if system.fixed[i] {
            pinned[i] = x[i];
        }
    }
    let mut b = vec![0.0; n];
    graph.apply_laplacian(&pinned, None, &mut b);
    for i in 0..n {
        b[i] = if system.fixed[i] { 0.0 } else { system.rhs[i] - b[i] };
    }
    let bnorm = math::sqrt(dot(&b, &b));
    if bnorm == 0.0 {
        // zero reduced rhs means the unique solution is zero on the
        // free subspace (the operator is positive definite there)
        for i in 0..n {
            if !system.fixed[i] {
                x[i] = 0.0;
            }
        }
    }

    // free-subspace operator: mask pins out of the Krylov vectors
    let mask = &system.fixed;
    let apply = |v: &[f64], out: &mut [f64]| {
        graph.apply_laplacian(v, Some(&system.extra_diag), out);
        for i in 0..n {
            if mask[i] {
                out[i] = 0.0;
            }
        }
    };

    let mut inv_diag = vec![0.0; n];
    for i in 0..n {
        if !mask[i] {
            let d = graph.weighted_degree(i as u32) + system.extra_diag[i];
            inv_diag[i] = if d > 0.0 { 1.0 / d } else { 0.0 };
        }
    }

    // r = b - A x0 (free part)
    let mut x_free: Vec<f64> = (0..n).map(|i| if mask[i] { 0.0 } else { x[i] }).collect();
    let mut r = vec![0.0; n];
    apply(&x_free, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = (0..n).map(|i| r[i] * inv_diag[i]).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let target = if bnorm > 0.0 { opts.tol * bnorm } else { 0.0 };

    let mut iterations = 0u32;
    let mut residual = math::sqrt(dot(&r, &r));
    let mut ap = vec![0.0; n];
    while residual > target && iterations < max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x_free[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
        residual = math::sqrt(dot(&r, &r));
    }

    if residual > target && bnorm > 0.0 {
        return Err(GscError::SolverDiverged { residual: residual / bnorm, iterations });
    }

    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = if mask[i] { system.values[i] } else { x_free[i] };
    }
    let rel = if bnorm > 0.0 { residual / bnorm } else { 0.0 };
    Ok((out, SolveStats { residual: rel, iterations }))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}
