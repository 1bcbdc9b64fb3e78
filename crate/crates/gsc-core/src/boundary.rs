//! Boundary energies: sub-face averages, the discrete face energies,
//! their weighted sums, shell energies and the decay experiment.
//!
//! The boundary quantities are built from ordinary node averages: at a
//! fixed sub-face level every sub-face carries the same surface weight,
//! so the normalized face measure reduces to equal-weight node means.
//!
//! Energies entering the trace and extension comparisons are rescaled
//! to the stage-normalized form via `energy_normalization`, which is
//! `(rho * len^(d-2))^m`; the graph energy itself approximates the
//! plain gradient energy against Lebesgue measure.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::GscError;
use crate::graph::SolveOptions;
use crate::lattice::LatticeDomain;
use crate::math;
use crate::pattern::{pow_u64, CellIndex, GscPattern, SubFace};
use crate::resistance::{solve_dirichlet, HarmonicSolution};
use crate::Result;

/// Walk-dimension estimate from a resistance scaling estimate.
pub fn walk_dim(pattern: &GscPattern, rho_hat: f64) -> f64 {
    math::ln(rho_hat * pattern.kept_count() as f64) / math::ln(pattern.len_factor() as f64)
}

/// The two-branch resistance weight, continuous at `r = len^-m`:
/// `r^(d_f - d_w)` on the coarse side, `(rho len^(d-2))^m r^(d-2)`
/// below the stage scale.
pub fn phi(pattern: &GscPattern, m: u32, r: f64, rho_hat: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(GscError::Contract("phi needs r > 0".into()));
    }
    let len = pattern.len_factor() as f64;
    let d = pattern.dim() as i32;
    let d_f = math::ln(pattern.kept_count() as f64) / math::ln(len);
    let d_w = walk_dim(pattern, rho_hat);
    let stage_scale = math::powi(len, -(m as i32));
    if r >= stage_scale {
        Ok(math::powf(r, d_f - d_w))
    } else {
        let prefactor = math::powf(len, (d_w - d_f + d as f64 - 2.0) * m as f64);
        Ok(prefactor * math::powf(r, d as f64 - 2.0))
    }
}

/// Factor turning the lattice edge-sum energy into the stage-normalized
/// energy: `(rho * len^(d-2))^m`.
pub fn energy_normalization(pattern: &GscPattern, m: u32, rho_hat: f64) -> f64 {
    let len = pattern.len_factor() as f64;
    let d = pattern.dim() as i32;
    math::powf(rho_hat * math::powi(len, d - 2), m as f64)
}

/// Equal-weight average of node values over a sub-face.
pub fn subface_average(domain: &LatticeDomain, values: &[f64], face: &SubFace) -> Result<f64> {
    let nodes = domain.face_nodes(face)?;
    let sum: f64 = nodes.iter().map(|&v| values[v as usize]).sum();
    Ok(sum / nodes.len() as f64)
}

/// Sum of squared average differences over adjacent level-`k` sub-faces
/// of the outer boundary.
pub fn discrete_energy(domain: &LatticeDomain, values: &[f64], k: u32) -> Result<f64> {
    if k == 0 {
        return Err(GscError::Contract("discrete face energy needs k >= 1".into()));
    }
    let pattern = domain.pattern();
    let m = domain.domain_level();
    let faces = pattern.subfaces(m, k);
    let edges = pattern.subface_adjacency(m, k)?;
    let averages: Result<Vec<f64>> =
        faces.iter().map(|f| subface_average(domain, values, f)).collect();
    let averages = averages?;
    let mut total = 0.0;
    for &(a, b) in &edges {
        let d = averages[a as usize] - averages[b as usize];
        total += d * d;
    }
    Ok(total)
}

/// Finest sub-face level whose faces all carry at least `4^(d-1)`
/// nodes; below that resolution the averages alias.
pub fn resolution_limit(domain: &LatticeDomain) -> u32 {
    let len = domain.pattern().len_factor() as u64;
    let mut need = 1u32;
    let mut power = len;
    while power < 4 {
        need += 1;
        power *= len;
    }
    domain.grid_level().saturating_sub(need)
}

/// One term of the weighted boundary energy.
#[derive(Debug, Clone, Copy)]
pub struct BesovEntry {
    pub k: u32,
    pub i_k: f64,
    pub phi_k: f64,
    pub term: f64,
}

/// Weighted boundary energy profile over sub-face levels.
#[derive(Debug, Clone)]
pub struct BesovProfile {
    pub entries: Vec<BesovEntry>,
    /// finest level summed
    pub k_max: u32,
    /// true when the requested depth exceeded the grid resolution
    pub truncated: bool,
}

impl BesovProfile {
    /// Tail sum from level `n`; the partial realization of the infinite
    /// weighted sum.
    pub fn lambda(&self, n: u32) -> f64 {
        self.entries.iter().filter(|e| e.k >= n).map(|e| e.term).sum()
    }

    /// Magnitude of the last computed term, a tail indicator.
    pub fn tail_term(&self) -> f64 {
        self.entries.last().map(|e| e.term).unwrap_or(0.0)
    }
}

/// Compute the per-level face energies and weights up to `k_max`
/// (bounded by the aliasing limit of the grid).
pub fn besov_profile(
    domain: &LatticeDomain,
    values: &[f64],
    rho_hat: f64,
    k_max: u32,
) -> Result<BesovProfile> {
    let limit = resolution_limit(domain);
    let used = k_max.min(limit);
    if used == 0 {
        return Err(GscError::Resolution { requested: k_max, available: limit });
    }
    let pattern = domain.pattern();
    let m = domain.domain_level();
    let len = pattern.len_factor() as f64;
    let mut entries = Vec::with_capacity(used as usize);
    for k in 1..=used {
        let i_k = discrete_energy(domain, values, k)?;
        let phi_k = phi(pattern, m, math::powi(len, -(k as i32)), rho_hat)?;
        entries.push(BesovEntry { k, i_k, phi_k, term: phi_k * i_k });
    }
    Ok(BesovProfile { entries, k_max: used, truncated: used < k_max })
}

/// One boundary shell row.
#[derive(Debug, Clone, Copy)]
pub struct ShellEntry {
    pub level: u32,
    /// energy in the shell minus the next-finer shell
    pub annulus: f64,
    /// energy within the level-`level` boundary shell
    pub cumulative: f64,
}

/// Energy localized to the boundary shells of the unit cube.
#[derive(Debug, Clone)]
pub struct ShellEnergyProfile {
    pub entries: Vec<ShellEntry>,
    pub total: f64,
}

/// Split a solution's energy over the nested boundary shells at levels
/// `0..=levels`. Straddling edges are charged half to each side, so
/// the level-0 entry equals the total energy exactly.
pub fn shell_energy_profile(
    domain: &LatticeDomain,
    solution: &HarmonicSolution,
    levels: u32,
) -> ShellEnergyProfile {
    let levels = levels.min(domain.grid_level());
    let mut cumulative = vec![0.0f64; levels as usize + 1];
    let side = domain.side();
    let len = domain.pattern().len_factor();
    let membership = |node: u32, k: u32| -> bool {
        let cell_size = pow_u64(len, domain.grid_level() - k);
        domain
            .node_coords(node)
            .iter()
            .any(|&c| (c as u64) < cell_size || c as u64 >= side - cell_size)
    };
    domain.graph().for_each_edge(|u, v, c| {
        let d = solution.values[u as usize] - solution.values[v as usize];
        let e = c * d * d;
        for k in 0..=levels {
            let w = (membership(u, k) as u8 + membership(v, k) as u8) as f64 * 0.5;
            if w == 0.0 {
                break; // membership is monotone in k
            }
            cumulative[k as usize] += w * e;
        }
    });
    for &(node, c, pot) in solution.half_edges() {
        let d = solution.values[node as usize] - pot;
        let e = c * d * d;
        for k in 0..=levels {
            // grounded edges sit on the outer boundary itself
            debug_assert!(membership(node, k));
            cumulative[k as usize] += e;
        }
    }
    let entries = (0..=levels)
        .map(|k| ShellEntry {
            level: k,
            annulus: cumulative[k as usize]
                - cumulative.get(k as usize + 1).copied().unwrap_or(0.0),
            cumulative: cumulative[k as usize],
        })
        .collect();
    ShellEnergyProfile { entries, total: solution.energy }
}

/// The weighted boundary energy of a solution's trace against the
/// stage-normalized energy near the boundary.
#[derive(Debug, Clone, Copy)]
pub struct TraceRatio {
    pub lambda_n: f64,
    /// normalized energy within the level-(n-1) shell
    pub shell_energy: f64,
    pub ratio: f64,
    /// positive boundary energy over a zero shell energy: inconsistent
    pub violation: bool,
}

/// Compare the level-`n` weighted boundary energy with the energy in
/// the level-(n-1) shell.
pub fn trace_ratio(
    domain: &LatticeDomain,
    solution: &HarmonicSolution,
    rho_hat: f64,
    n: u32,
) -> Result<TraceRatio> {
    if n == 0 {
        return Err(GscError::Contract("trace comparison needs n >= 1".into()));
    }
    let profile = besov_profile(domain, &solution.values, rho_hat, resolution_limit(domain))?;
    if profile.k_max < n {
        return Err(GscError::Resolution { requested: n, available: profile.k_max });
    }
    let lambda_n = profile.lambda(n);
    let shells = shell_energy_profile(domain, solution, n - 1);
    let norm = energy_normalization(domain.pattern(), domain.domain_level(), rho_hat);
    let shell_energy = norm * shells.entries[n as usize - 1].cumulative;
    let violation = shell_energy == 0.0 && lambda_n > 0.0;
    let ratio = if lambda_n == 0.0 {
        0.0
    } else if shell_energy == 0.0 {
        f64::INFINITY
    } else {
        lambda_n / shell_energy
    };
    Ok(TraceRatio { lambda_n, shell_energy, ratio, violation })
}

/// Energy of the minimal extension of boundary data against the
/// weighted boundary energy of the data.
#[derive(Debug, Clone, Copy)]
pub struct ExtensionRatio {
    /// stage-normalized energy of the harmonic extension
    pub energy: f64,
    pub lambda_1: f64,
    pub ratio: f64,
    /// nonconstant data with zero weighted boundary energy
    pub violation: bool,
}

/// Harmonically extend boundary node data and compare its energy with
/// the weighted boundary energy of the trace. The harmonic fill
/// minimizes energy over all extensions, so this ratio lower-bounds
/// the constant of any extension map.
pub fn extension_ratio(
    domain: &LatticeDomain,
    boundary_values: &[(u32, f64)],
    rho_hat: f64,
    opts: SolveOptions,
) -> Result<(ExtensionRatio, HarmonicSolution)> {
    let solution = crate::extension::harmonic_extension(domain, boundary_values, opts)?;
    let profile = besov_profile(domain, &solution.values, rho_hat, resolution_limit(domain))?;
    let lambda_1 = profile.lambda(1);
    let norm = energy_normalization(domain.pattern(), domain.domain_level(), rho_hat);
    let energy = norm * solution.energy;
    let constant_data = {
        let first = boundary_values.first().map(|&(_, v)| v).unwrap_or(0.0);
        boundary_values.iter().all(|&(_, v)| (v - first).abs() == 0.0)
    };
    let violation = lambda_1 == 0.0 && !constant_data;
    let ratio = if energy == 0.0 {
        0.0
    } else if lambda_1 == 0.0 {
        f64::INFINITY
    } else {
        energy / lambda_1
    };
    Ok((ExtensionRatio { energy, lambda_1, ratio, violation }, solution))
}

/// Least-squares exponential fit of a decay profile.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// decay rate per level (positive = decaying)
    pub rate: f64,
    pub prefactor: f64,
}

/// Shell energies of a locally harmonic function inside one cell.
#[derive(Debug, Clone)]
pub struct DecayProfile {
    /// cumulative shell energies inside the cell, normalized by the
    /// neighborhood energy; index = shell level relative to the cell
    pub entries: Vec<ShellEntry>,
    /// energy of the solve over the whole cell neighborhood
    pub neighborhood_energy: f64,
    pub fit: Option<DecayFit>,
    /// depth actually resolved by the grid
    pub depth_used: u32,
    pub truncated: bool,
    /// all shell energies vanished; nothing to fit
    pub degenerate: bool,
}

/// Solve with boundary data on the rim of the neighborhood of `cell`
/// (free everywhere its lattice neighbors stay inside the
/// neighborhood), then measure the energy in the shells hugging the
/// cell's boundary, relative levels `0..=depth`.
pub fn decay_experiment<F: Fn(&[f64]) -> f64>(
    domain: &LatticeDomain,
    cell: &CellIndex,
    depth: u32,
    data: F,
    opts: SolveOptions,
) -> Result<DecayProfile> {
    let l = cell.level;
    if l == 0 || l > domain.domain_level() {
        return Err(GscError::Contract(alloc::format!(
            "cell level must be in 1..=domain level, got {l}"
        )));
    }
    if !domain.pattern().retains(cell) {
        return Err(GscError::Contract(alloc::format!("cell {cell} is not retained")));
    }
    let (depth_used, truncated) = if l + depth > domain.grid_level() {
        (domain.grid_level() - l, true)
    } else {
        (depth, false)
    };

    // neighborhood membership by level-l ancestor box adjacency
    let n = domain.node_count() as u32;
    let in_hood: Vec<bool> = (0..n)
        .map(|v| {
            let anc = domain.node_cell(v, l);
            anc.coords
                .iter()
                .zip(cell.coords.iter())
                .all(|(&a, &b)| (a as i64 - b as i64).abs() <= 1)
        })
        .collect();

    let mut sys = crate::graph::DirichletSystem::new(domain.graph());
    let mut free_count = 0usize;
    let mut rim_count = 0usize;
    for v in 0..n {
        if !in_hood[v as usize] {
            sys.pin(v, 0.0);
            continue;
        }
        let rim = domain.graph().neighbors(v).iter().any(|&u| !in_hood[u as usize]);
        if rim {
            sys.pin(v, data(&domain.node_center(v)));
            rim_count += 1;
        } else {
            free_count += 1;
        }
    }
    if rim_count == 0 {
        return Err(GscError::Contract(
            "cell neighborhood covers the whole domain; use a deeper cell level".into(),
        ));
    }
    if free_count == 0 {
        return Err(GscError::Contract("neighborhood has no interior nodes".into()));
    }
    // constant rim data extends to an exact constant: report the
    // degenerate profile without solving
    let rim_values: Vec<f64> = (0..n)
        .filter(|&v| in_hood[v as usize] && sys.fixed[v as usize])
        .map(|v| sys.values[v as usize])
        .collect();
    let spread = rim_values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if spread.1 - spread.0 == 0.0 {
        let entries = (0..=depth_used)
            .map(|k| ShellEntry { level: k, annulus: 0.0, cumulative: 0.0 })
            .collect();
        return Ok(DecayProfile {
            entries,
            neighborhood_energy: 0.0,
            fit: None,
            depth_used,
            truncated,
            degenerate: true,
        });
    }
    let (values, _) = crate::graph::solve_cg(&sys, opts)?;

    // energies over edges interior to the neighborhood
    let mut hood_energy = 0.0;
    let mut cumulative = vec![0.0f64; depth_used as usize + 1];
    let len = domain.pattern().len_factor();
    let scale_l = pow_u64(len, domain.grid_level() - l);
    let membership = |node: u32, rel: u32| -> bool {
        let coords = domain.node_coords(node);
        let mut inside = true;
        let mut on_shell = false;
        let sub = pow_u64(len, domain.grid_level() - l - rel);
        let rel_side = pow_u64(len, rel);
        for (axis, &c) in coords.iter().enumerate() {
            let base = cell.coords[axis] as u64 * scale_l;
            if (c as u64) < base || c as u64 >= base + scale_l {
                inside = false;
                break;
            }
            let r = (c as u64 - base) / sub;
            if r == 0 || r == rel_side - 1 {
                on_shell = true;
            }
        }
        inside && on_shell
    };
    domain.graph().for_each_edge(|u, v, c| {
        if !in_hood[u as usize] || !in_hood[v as usize] {
            return;
        }
        let d = values[u as usize] - values[v as usize];
        let e = c * d * d;
        hood_energy += e;
        for rel in 0..=depth_used {
            let w = (membership(u, rel) as u8 + membership(v, rel) as u8) as f64 * 0.5;
            if w > 0.0 {
                cumulative[rel as usize] += w * e;
            }
        }
    });

    let degenerate = hood_energy == 0.0 || cumulative.iter().all(|&e| e == 0.0);
    let entries: Vec<ShellEntry> = (0..=depth_used)
        .map(|k| ShellEntry {
            level: k,
            annulus: cumulative[k as usize]
                - cumulative.get(k as usize + 1).copied().unwrap_or(0.0),
            cumulative: if hood_energy > 0.0 {
                cumulative[k as usize] / hood_energy
            } else {
                0.0
            },
        })
        .collect();

    // fit the cumulative decay on levels >= 1; the zeroth shell is the
    // whole cell and would bias the slope
    let pts: Vec<(f64, f64)> = entries
        .iter()
        .skip(1)
        .filter(|e| e.cumulative > 0.0)
        .map(|e| (e.level as f64, math::ln(e.cumulative)))
        .collect();
    let fit = if degenerate || pts.len() < 2 {
        None
    } else {
        let (slope, intercept) = line_fit(&pts);
        Some(DecayFit { rate: -slope, prefactor: math::exp(intercept) })
    };

    Ok(DecayProfile {
        entries,
        neighborhood_energy: hood_energy,
        fit,
        depth_used,
        truncated,
        degenerate,
    })
}

/// Convenience wrapper: solve the resistance problem and return the
/// trace comparison for each requested level.
pub fn trace_study(
    domain: &LatticeDomain,
    solution: &HarmonicSolution,
    rho_hat: f64,
    n_values: &[u32],
) -> Result<Vec<TraceRatio>> {
    n_values.iter().map(|&n| trace_ratio(domain, solution, rho_hat, n)).collect()
}

/// Fit y = a + b x, returning (slope, intercept).
pub(crate) fn line_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return (0.0, sy / n);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// Solve the axis-0 resistance problem with pinned boundary columns;
/// the canonical nontrivial test function for boundary studies.
pub fn pinned_minimizer(domain: &LatticeDomain, opts: SolveOptions) -> Result<HarmonicSolution> {
    let mut fixed = Vec::new();
    for v in domain.tagged_nodes(&[(0, 0)]) {
        fixed.push((v, 0.0));
    }
    for v in domain.tagged_nodes(&[(0, 1)]) {
        fixed.push((v, 1.0));
    }
    solve_dirichlet(domain, &fixed, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x1_solution(domain: &LatticeDomain) -> HarmonicSolution {
        // harmonic extension of the first coordinate: fix every outer
        // node at its centre's x_1 and solve; the interior reproduces
        // the coordinate exactly
        let fixed: Vec<(u32, f64)> =
            domain.outer_nodes().iter().map(|&v| (v, domain.node_center(v)[0])).collect();
        solve_dirichlet(domain, &fixed, SolveOptions::default()).unwrap()
    }

    #[test]
    fn phi_is_one_at_scale_one() {
        let sc = GscPattern::standard_carpet();
        assert!((phi(&sc, 0, 1.0, 1.25).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn phi_branches_join_continuously() {
        let sc = GscPattern::standard_carpet();
        for m in [1u32, 2, 3] {
            let r = math::powi(3.0, -(m as i32));
            let above = phi(&sc, m, r * (1.0 + 1e-9), 1.25).unwrap();
            let below = phi(&sc, m, r * (1.0 - 1e-9), 1.25).unwrap();
            assert!((above - below).abs() / above < 1e-6, "m={m}");
        }
    }

    #[test]
    fn phi_flat_below_stage_scale_in_plane() {
        let sc = GscPattern::standard_carpet();
        let a = phi(&sc, 2, 1e-3, 1.25).unwrap();
        let b = phi(&sc, 2, 1e-5, 1.25).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn phi_rejects_nonpositive_radius() {
        let sc = GscPattern::standard_carpet();
        assert!(phi(&sc, 1, 0.0, 1.25).is_err());
    }

    #[test]
    fn phi_nonincreasing_when_walk_dim_exceeds_fractal_dim() {
        let sc = GscPattern::standard_carpet();
        let mut prev = f64::INFINITY;
        for i in 1..=60 {
            let r = i as f64 / 60.0;
            let value = phi(&sc, 2, r, 1.25).unwrap();
            assert!(value <= prev + 1e-12, "phi jumped at r = {r}");
            prev = value;
        }
    }

    #[test]
    fn subface_average_of_constant() {
        let sc = GscPattern::standard_carpet();
        let dom = LatticeDomain::build(&sc, 1, 2, 0).unwrap();
        let values = vec![4.25; dom.node_count()];
        let face = SubFace { cell: CellIndex::new(1, vec![0, 1]), axis: 0, side: 0 };
        assert!((subface_average(&dom, &values, &face).unwrap() - 4.25).abs() < 1e-15);
    }

    #[test]
    fn coordinate_trace_averages_are_exact() {
        let full = GscPattern::keep_all(2, 3).unwrap();
        let dom = LatticeDomain::build(&full, 0, 2, 0).unwrap();
        let sol = x1_solution(&dom);
        // bottom side, level 1: averages of x_1 over thirds
        for (cell_x, expect) in [(0u32, 1.0 / 6.0), (1, 0.5), (2, 5.0 / 6.0)] {
            let face = SubFace { cell: CellIndex::new(1, vec![cell_x, 0]), axis: 1, side: 0 };
            let avg = subface_average(&dom, &sol.values, &face).unwrap();
            assert!((avg - expect).abs() < 1e-10, "{cell_x}: {avg}");
        }
    }

    #[test]
    fn discrete_energy_of_constant_vanishes() {
        let sc = GscPattern::standard_carpet();
        let dom = LatticeDomain::build(&sc, 2, 3, 0).unwrap();
        let values = vec![7.0; dom.node_count()];
        for k in 1..=2 {
            assert_eq!(discrete_energy(&dom, &values, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn discrete_energy_scales_quadratically() {
        let sc = GscPattern::standard_carpet();
        let dom = LatticeDomain::build(&sc, 2, 3, 0).unwrap();
        let sol = pinned_minimizer(&dom, SolveOptions::default()).unwrap();
        let doubled: Vec<f64> = sol.values.iter().map(|v| 2.0 * v).collect();
        let flipped: Vec<f64> = sol.values.iter().map(|v| -v).collect();
        let shifted: Vec<f64> = sol.values.iter().map(|v| v + 3.0).collect();
        for k in 1..=2 {
            let base = discrete_energy(&dom, &sol.values, k).unwrap();
            let two = discrete_energy(&dom, &doubled, k).unwrap();
            let neg = discrete_energy(&dom, &flipped, k).unwrap();
            let plus = discrete_energy(&dom, &shifted, k).unwrap();
            assert!((two - 4.0 * base).abs() <= 1e-10 * base.max(1.0));
            assert!((neg - base).abs() <= 1e-12 * base.max(1.0));
            assert!((plus - base).abs() <= 1e-10 * base.max(1.0));
        }
    }

    #[test]
    fn lambda_is_nonincreasing_in_n() {
        let sc = GscPattern::standard_carpet();
        let dom = LatticeDomain::build(&sc, 3, 5, 0).unwrap();
        let sol = pinned_minimizer(&dom, SolveOptions::default()).unwrap();
        let profile = besov_profile(&dom, &sol.values, 1.25, resolution_limit(&dom)).unwrap();
        let mut prev = f64::INFINITY;
        for n in 1..=profile.k_max {
            let l = profile.lambda(n);
            assert!(l <= prev + 1e-15);
            assert!(l >= 0.0);
            prev = l;
        }
    }

    #[test]
    fn resolution_limit_matches_aliasing_rule() {
        let sc = GscPattern::standard_carpet();
        let dom = LatticeDomain::build(&sc, 3, 5, 0).unwrap();
        // len 3: need two levels of refinement for 9 >= 4 nodes per face
        assert_eq!(resolution_limit(&dom), 3);
    }

    #[test]
    fn shell_profile_of_coordinate_on_full_square() {
        let full = GscPattern::keep_all(2, 3).unwrap();
        let dom = LatticeDomain::build(&full, 2, 3, 0).unwrap();
        let sol = x1_solution(&dom);
        let shells = shell_energy_profile(&dom, &sol, 2);
        // level 0 carries everything
        assert!((shells.entries[0].cumulative - sol.energy).abs() <= 1e-12 * sol.energy);
        // uniform energy density: shell k carries roughly the shell
        // area, up to the O(h) rim of half-split edges
        let side = 1.0;
        for entry in &shells.entries[1..] {
            let w = math::powi(3.0, -(entry.level as i32));
            let area = side * side - (side - 2.0 * w) * (side - 2.0 * w);
            assert!(
                (entry.cumulative / sol.energy - area).abs() < 0.05,
                "level {}: {} vs {area}",
                entry.level,
                entry.cumulative / sol.energy
            );
        }
        // cumulative monotone
        for w in shells.entries.windows(2) {
            assert!(w[1].cumulative <= w[0].cumulative + 1e-15);
        }
    }

    #[test]
    fn trace_ratio_constant_is_zero() {
        let sc = GscPattern::standard_carpet();
        let dom = LatticeDomain::build(&sc, 2, 4, 0).unwrap();
        let outer = dom.outer_nodes();
        let fixed: Vec<(u32, f64)> = outer.iter().map(|&v| (v, 1.5)).collect();
        let sol = solve_dirichlet(&dom, &fixed, SolveOptions::default()).unwrap();
        let tr = trace_ratio(&dom, &sol, 1.25, 1).unwrap();
        assert_eq!(tr.ratio, 0.0);
        assert!(!tr.violation);
    }

    #[test]
    fn decay_constant_data_is_degenerate() {
        let sc = GscPattern::standard_carpet();
        let dom = LatticeDomain::build(&sc, 3, 3, 0).unwrap();
        let cell = CellIndex::new(1, vec![0, 0]);
        let profile =
            decay_experiment(&dom, &cell, 2, |_| 1.0, SolveOptions::default()).unwrap();
        assert!(profile.degenerate);
        assert!(profile.fit.is_none());
    }

    #[test]
    fn decay_on_full_square_has_positive_rate() {
        let full = GscPattern::keep_all(2, 3).unwrap();
        let dom = LatticeDomain::build(&full, 4, 4, 0).unwrap();
        // an interior cell whose neighborhood leaves a rim to pin
        let cell = CellIndex::new(2, vec![4, 4]);
        let profile =
            decay_experiment(&dom, &cell, 2, |x| x[0], SolveOptions::default()).unwrap();
        assert!(!profile.degenerate);
        assert!(!profile.truncated);
        let fit = profile.fit.unwrap();
        assert!(fit.rate > 0.0, "rate {}", fit.rate);
        for w in profile.entries.windows(2) {
            assert!(w[1].cumulative <= w[0].cumulative + 1e-15);
        }
    }

    #[test]
    fn decay_rejects_rimless_neighborhood() {
        let full = GscPattern::keep_all(2, 3).unwrap();
        let dom = LatticeDomain::build(&full, 2, 2, 0).unwrap();
        // at level 1 the centre cell's neighborhood is the whole square
        let cell = CellIndex::new(1, vec![1, 1]);
        assert!(matches!(
            decay_experiment(&dom, &cell, 1, |x| x[0], SolveOptions::default()),
            Err(GscError::Contract(_))
        ));
    }

    #[test]
    fn decay_depth_truncates_with_flag() {
        let sc = GscPattern::standard_carpet();
        let dom = LatticeDomain::build(&sc, 3, 3, 0).unwrap();
        let cell = CellIndex::new(1, vec![0, 0]);
        let profile =
            decay_experiment(&dom, &cell, 9, |x| x[0] + x[1], SolveOptions::default()).unwrap();
        assert!(profile.truncated);
        assert_eq!(profile.depth_used, 2);
    }
}
