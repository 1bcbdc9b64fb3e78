//! Shared oracles for the integration tests: a dense direct solver kept
//! independent of the CG path, brute-force geometry enumeration, and
//! the pattern corpus the property tests sweep.
#![allow(dead_code)]

use gsc_core::graph::CsrGraph;
use gsc_core::pattern::GscPattern;

/// Patterns exercised by every invariant sweep.
pub fn corpus() -> Vec<(&'static str, GscPattern)> {
    vec![
        ("standard_carpet", GscPattern::standard_carpet()),
        ("full_square", GscPattern::keep_all(2, 3).unwrap()),
        ("frame_5", frame_pattern()),
        ("sponge", GscPattern::sponge()),
        ("full_cube_3d", GscPattern::keep_all(3, 3).unwrap()),
    ]
}

/// d=2, len=5 pattern with the whole 3x3 centre block removed.
pub fn frame_pattern() -> GscPattern {
    let removed: Vec<Vec<u32>> = (1..4u32)
        .flat_map(|i| (1..4u32).map(move |j| vec![i, j]))
        .collect();
    GscPattern::from_removed(2, 5, &removed).unwrap()
}

/// Dense Gaussian elimination with partial pivoting for the constrained
/// Laplacian system: L x + diag(extra) x = rhs with pinned entries.
/// Deliberately shares no code with the CG solver.
pub fn dense_dirichlet(
    graph: &CsrGraph,
    fixed: &[Option<f64>],
    extra_diag: &[f64],
    rhs: &[f64],
) -> Vec<f64> {
    let n = graph.node_count();
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    let index_of: std::collections::HashMap<usize, usize> =
        free.iter().enumerate().map(|(slot, &node)| (node, slot)).collect();
    let k = free.len();
    let mut a = vec![vec![0.0f64; k]; k];
    let mut b = vec![0.0f64; k];
    for (slot, &node) in free.iter().enumerate() {
        a[slot][slot] += graph.weighted_degree(node as u32) + extra_diag[node];
        b[slot] += rhs[node];
    }
    graph.for_each_edge(|u, v, w| {
        let (u, v) = (u as usize, v as usize);
        match (index_of.get(&u), index_of.get(&v)) {
            (Some(&su), Some(&sv)) => {
                a[su][sv] -= w;
                a[sv][su] -= w;
            }
            (Some(&su), None) => b[su] += w * fixed[v].unwrap(),
            (None, Some(&sv)) => b[sv] += w * fixed[u].unwrap(),
            (None, None) => {}
        }
    });
    // elimination
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        assert!(p.abs() > 1e-14, "singular dense system");
        for row in col + 1..k {
            let factor = a[row][col] / p;
            if factor != 0.0 {
                for c in col..k {
                    a[row][c] -= factor * a[col][c];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x_free = vec![0.0f64; k];
    for row in (0..k).rev() {
        let mut acc = b[row];
        for c in row + 1..k {
            acc -= a[row][c] * x_free[c];
        }
        x_free[row] = acc / a[row][row];
    }
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = fixed[i].unwrap_or(0.0);
    }
    for (slot, &node) in free.iter().enumerate() {
        out[node] = x_free[slot];
    }
    out
}

/// Brute-force cell enumeration by recursive digit expansion; written
/// independently of `GscPattern::enumerate_cells`.
pub fn brute_cells(pattern: &GscPattern, n: u32) -> Vec<Vec<u32>> {
    let d = pattern.dim() as usize;
    let len = pattern.len_factor();
    let mut cells: Vec<Vec<u32>> = vec![vec![0; d]];
    for _ in 0..n {
        let mut next = Vec::new();
        for cell in &cells {
            for digit in all_tuples(d, len) {
                if pattern.keeps(&digit) {
                    let coords: Vec<u32> = cell
                        .iter()
                        .zip(digit.iter())
                        .map(|(&c, &t)| c * len + t)
                        .collect();
                    next.push(coords);
                }
            }
        }
        cells = next;
    }
    cells.sort();
    cells
}

pub fn all_tuples(d: usize, base: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for prefix in &out {
            for digit in 0..base {
                let mut t = prefix.clone();
                t.push(digit);
                next.push(t);
            }
        }
        out = next;
    }
    out
}
