//! Mean exit times of the lattice walk and their stage normalization.
//!
//! The walk steps to a uniformly chosen neighbour; its expected step
//! count to a target set solves the Poisson problem `L s = deg` with
//! `s = 0` on the targets. One lattice step of spacing `h` corresponds
//! to continuum time `h^2 / d`, and the stage-`n` values are rescaled
//! by the time-scaling base `rhobar^n` so that a stabilizing sequence
//! signals convergence of the normalized processes.

use alloc::vec::Vec;

use crate::error::GscError;
use crate::graph::{solve_cg, CsrGraph, DirichletSystem, SolveOptions, SolveStats};
use crate::lattice::LatticeDomain;
use crate::math;
use crate::pattern::GscPattern;
use crate::Result;

/// Expected steps of the neighbour-uniform walk from `start` to the
/// target set, on an arbitrary graph.
pub fn mean_exit_steps(
    graph: &CsrGraph,
    start: u32,
    targets: &[bool],
    opts: SolveOptions,
) -> Result<(f64, SolveStats)> {
    if targets.len() != graph.node_count() {
        return Err(GscError::InvalidInput("target mask length mismatch".into()));
    }
    if !targets.iter().any(|&t| t) {
        return Err(GscError::Contract("empty target set".into()));
    }
    if targets[start as usize] {
        return Ok((0.0, SolveStats { residual: 0.0, iterations: 0 }));
    }
    let mut sys = DirichletSystem::new(graph);
    for (v, &hit) in targets.iter().enumerate() {
        if hit {
            sys.pin(v as u32, 0.0);
        } else {
            sys.rhs[v] = graph.weighted_degree(v as u32);
        }
    }
    let (values, stats) = solve_cg(&sys, opts)?;
    Ok((values[start as usize], stats))
}

/// Expected steps from the cell at the origin corner to the cells
/// touching any of the given faces.
pub fn mean_exit(
    domain: &LatticeDomain,
    start: &[u32],
    target_faces: &[(u32, u8)],
    opts: SolveOptions,
) -> Result<(f64, SolveStats)> {
    let start_node = domain
        .find_node(start)
        .ok_or_else(|| GscError::Contract("start cell is not in the domain".into()))?;
    let mut targets = alloc::vec![false; domain.node_count()];
    for v in domain.tagged_nodes(target_faces) {
        targets[v as usize] = true;
    }
    mean_exit_steps(domain.graph(), start_node, &targets, opts)
}

/// One stage of the exit-time series.
#[derive(Debug, Clone, Copy)]
pub struct ExitEntry {
    pub n: u32,
    pub m_prime: u32,
    /// raw expected step count at the origin
    pub steps: f64,
    /// continuum time `steps * h^2 / d`
    pub t_value: f64,
    /// stage-normalized time `t / rhobar^n`
    pub a_value: f64,
    /// reciprocal normalization `1 / a`
    pub alpha: f64,
    /// relative change against the previous stage
    pub rel_change: Option<f64>,
}

/// The normalized exit-time sequence and its plateau estimate.
#[derive(Debug, Clone)]
pub struct ExitTimeSeries {
    pub entries: Vec<ExitEntry>,
    /// the final normalized value; the plateau estimate
    pub c0_hat: f64,
    pub rhobar_hat: f64,
}

/// Exit times of the origin cell toward the far faces for stages
/// `1..=n_max`, each on the grid `n + extra`.
pub fn exit_series(
    pattern: &GscPattern,
    n_max: u32,
    extra: u32,
    rho_hat: f64,
    node_cap: u64,
    opts: SolveOptions,
) -> Result<ExitTimeSeries> {
    if n_max == 0 {
        return Err(GscError::Contract("exit series needs n_max >= 1".into()));
    }
    let d = pattern.dim();
    let len = pattern.len_factor();
    let rhobar = rho_hat * pattern.kept_count() as f64 / (len as f64 * len as f64);
    let far_faces: Vec<(u32, u8)> = (0..d).map(|axis| (axis, 1u8)).collect();

    let mut entries: Vec<ExitEntry> = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let m_prime = n + extra;
        let domain = LatticeDomain::build(pattern, n, m_prime, node_cap)?;
        let origin = alloc::vec![0u32; d as usize];
        let (steps, _) = mean_exit(&domain, &origin, &far_faces, opts)?;
        let h = math::powi(len as f64, -(m_prime as i32));
        let t_value = steps * h * h / d as f64;
        let a_value = t_value / math::powf(rhobar, n as f64);
        let rel_change = entries
            .last()
            .map(|prev: &ExitEntry| math::abs(a_value - prev.a_value) / math::abs(prev.a_value));
        entries.push(ExitEntry {
            n,
            m_prime,
            steps,
            t_value,
            a_value,
            alpha: 1.0 / a_value,
            rel_change,
        });
    }
    let c0_hat = entries.last().expect("n_max >= 1").a_value;
    Ok(ExitTimeSeries { entries, c0_hat, rhobar_hat: rhobar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeWeights;
    use alloc::vec;

    fn path(n: u32) -> CsrGraph {
        let edges: Vec<(u32, u32, f64)> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        CsrGraph::from_edges(n as usize, &edges)
    }

    #[test]
    fn start_on_target_is_zero() {
        let g = path(5);
        let mut targets = vec![false; 5];
        targets[2] = true;
        let (steps, _) = mean_exit_steps(&g, 2, &targets, SolveOptions::default()).unwrap();
        assert_eq!(steps, 0.0);
    }

    #[test]
    fn empty_targets_rejected() {
        let g = path(3);
        let targets = vec![false; 3];
        assert!(matches!(
            mean_exit_steps(&g, 0, &targets, SolveOptions::default()),
            Err(GscError::Contract(_))
        ));
    }

    #[test]
    fn reflected_path_matches_closed_form() {
        // reflecting end at 0, absorbing at n-1: s(i) = (n-1)^2 - i^2
        for n in [2u32, 5, 12] {
            let g = path(n);
            let mut targets = vec![false; n as usize];
            targets[n as usize - 1] = true;
            for i in 0..n - 1 {
                let (steps, _) =
                    mean_exit_steps(&g, i, &targets, SolveOptions::default()).unwrap();
                let expect = ((n - 1) * (n - 1)) as f64 - (i * i) as f64;
                assert!((steps - expect).abs() < 1e-7 * expect.max(1.0), "n={n} i={i}");
            }
        }
    }

    #[test]
    fn weighted_graph_uses_conductance_walk() {
        // two-edge star where one edge carries all the weight: from the
        // hub the walk almost surely jumps along the heavy edge
        let g = CsrGraph::from_edges(3, &[(0, 1, 1e6), (0, 2, 1.0)]);
        let mut targets = vec![false; 3];
        targets[1] = true;
        let (steps, _) = mean_exit_steps(&g, 0, &targets, SolveOptions::default()).unwrap();
        assert!((steps - 1.0).abs() < 1e-2, "steps {steps}");
    }

    #[test]
    fn exit_is_nonnegative_and_monotone_under_target_growth() {
        let sc = GscPattern::standard_carpet();
        let dom = LatticeDomain::build(&sc, 2, 2, 0).unwrap();
        let small = dom.tagged_nodes(&[(0, 1)]);
        let large = dom.tagged_nodes(&[(0, 1), (1, 1)]);
        let mut t_small = vec![false; dom.node_count()];
        for v in small {
            t_small[v as usize] = true;
        }
        let mut t_large = vec![false; dom.node_count()];
        for v in large {
            t_large[v as usize] = true;
        }
        let g = dom.graph();
        for v in 0..dom.node_count() as u32 {
            let (a, _) = mean_exit_steps(g, v, &t_small, SolveOptions::default()).unwrap();
            let (b, _) = mean_exit_steps(g, v, &t_large, SolveOptions::default()).unwrap();
            assert!(a >= -1e-9);
            assert!(b <= a + 1e-7);
        }
    }

    #[test]
    fn full_square_series_is_flat() {
        let full = GscPattern::keep_all(2, 3).unwrap();
        // grids 4 and 5: the absorbing-column bias is O(h), so flatness
        // within a few percent needs the finer grids
        let series = exit_series(&full, 2, 3, 1.0, 0, SolveOptions::default()).unwrap();
        assert!((series.rhobar_hat - 1.0).abs() < 1e-14);
        let a: Vec<f64> = series.entries.iter().map(|e| e.a_value).collect();
        for w in a.windows(2) {
            assert!((w[1] - w[0]).abs() / w[0] < 0.05, "{a:?}");
        }
        assert!(series.c0_hat > 0.0);
    }

    #[test]
    fn uniform_weights_match_unit_weights() {
        // scaling every conductance by the same factor leaves the walk
        // unchanged
        let g1 = path(7);
        let edges: Vec<(u32, u32, f64)> = (0..6).map(|i| (i, i + 1, 3.5)).collect();
        let g2 = CsrGraph::from_edges(7, &edges);
        let mut targets = vec![false; 7];
        targets[6] = true;
        let (a, _) = mean_exit_steps(&g1, 0, &targets, SolveOptions::default()).unwrap();
        let (b, _) = mean_exit_steps(&g2, 0, &targets, SolveOptions::default()).unwrap();
        assert!((a - b).abs() < 1e-7);
        let _ = EdgeWeights::Uniform(1.0);
    }
}
