//! Dirichlet solves on lattice domains and the resistance series.
//!
//! The face-to-face conductance D_n of the stage-n domain is the
//! minimum graph energy over functions pinned to 0 and 1 on a pair of
//! opposite faces. Two realizations of the face data are supported and
//! give different finite-grid values with the same limit:
//!
//! * `FaceContact` (default): boundary cells couple to the face
//!   potential through half-spacing edges of doubled conductance. The
//!   full cube then has D = 1 exactly at every grid level, which is the
//!   analytic anchor used throughout the test suite.
//! * `CellCenters`: the boundary cell values themselves are pinned.
//!   This is the bare network convention; on the 8-cell stage-1 carpet
//!   graph it reduces by series-parallel to D = 1 exactly.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::GscError;
use crate::graph::{solve_cg, DirichletSystem, SolveOptions, SolveStats};
use crate::lattice::LatticeDomain;
use crate::math;
use crate::pattern::{pow_u64, CellIndex, GscPattern};
use crate::Result;

/// How face potentials attach to the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRule {
    /// Half-spacing edges (conductance doubled) from boundary cells to
    /// the face potential.
    FaceContact,
    /// Boundary cell values pinned directly.
    CellCenters,
}

/// A solved Dirichlet problem: node values, the edge-sum energy, the
/// per-cell split of that energy at the domain level, and solver
/// diagnostics.
#[derive(Debug, Clone)]
pub struct HarmonicSolution {
    pub values: Vec<f64>,
    pub energy: f64,
    pub per_cell_energy: BTreeMap<CellIndex, f64>,
    pub residual: f64,
    pub iterations: u32,
    /// grounded edges included in the energy: (node, conductance,
    /// external potential)
    half_edges: Vec<(u32, f64, f64)>,
}

impl HarmonicSolution {
    pub(crate) fn assemble(
        domain: &LatticeDomain,
        values: Vec<f64>,
        stats: SolveStats,
        half_edges: Vec<(u32, f64, f64)>,
    ) -> Self {
        let energy = total_energy(domain, &values, &half_edges);
        let per_cell_energy = energy_by_cell(domain, &values, &half_edges, domain.domain_level());
        HarmonicSolution {
            values,
            energy,
            per_cell_energy,
            residual: stats.residual,
            iterations: stats.iterations,
            half_edges,
        }
    }

    pub fn half_edges(&self) -> &[(u32, f64, f64)] {
        &self.half_edges
    }

    /// Re-split the energy over the cells of an arbitrary level
    /// `<= grid level`.
    pub fn energy_by_level(&self, domain: &LatticeDomain, level: u32) -> BTreeMap<CellIndex, f64> {
        energy_by_cell(domain, &self.values, &self.half_edges, level)
    }
}

/// Edge-sum energy including grounded edges.
pub fn total_energy(domain: &LatticeDomain, values: &[f64], half_edges: &[(u32, f64, f64)]) -> f64 {
    let mut energy = domain.graph().energy(values);
    for &(node, c, v) in half_edges {
        let d = values[node as usize] - v;
        energy += c * d * d;
    }
    energy
}

/// Energy split over level-`level` cells. Edges interior to a cell are
/// charged to it; edges straddling two cells are charged half to each,
/// which keeps the split exactly additive. Grounded edges belong to
/// their node's cell.
pub fn energy_by_cell(
    domain: &LatticeDomain,
    values: &[f64],
    half_edges: &[(u32, f64, f64)],
    level: u32,
) -> BTreeMap<CellIndex, f64> {
    let mut by_key: BTreeMap<u128, f64> = BTreeMap::new();
    domain.graph().for_each_edge(|u, v, c| {
        let d = values[u as usize] - values[v as usize];
        let e = c * d * d;
        let ku = domain.node_cell_key(u, level);
        let kv = domain.node_cell_key(v, level);
        if ku == kv {
            *by_key.entry(ku).or_insert(0.0) += e;
        } else {
            *by_key.entry(ku).or_insert(0.0) += 0.5 * e;
            *by_key.entry(kv).or_insert(0.0) += 0.5 * e;
        }
    });
    for &(node, c, v) in half_edges {
        let d = values[node as usize] - v;
        *by_key.entry(domain.node_cell_key(node, level)).or_insert(0.0) += c * d * d;
    }
    by_key
        .into_iter()
        .map(|(key, e)| (unpack_cell(domain, key, level), e))
        .collect()
}

fn unpack_cell(domain: &LatticeDomain, key: u128, level: u32) -> CellIndex {
    let side = pow_u64(domain.pattern().len_factor(), level) as u128;
    let d = domain.pattern().dim() as usize;
    let mut coords = vec![0u32; d];
    let mut acc = key;
    for i in (0..d).rev() {
        coords[i] = (acc % side) as u32;
        acc /= side;
    }
    CellIndex::new(level, coords)
}

/// Solve with explicit node pins; energy is the plain edge sum.
pub fn solve_dirichlet(
    domain: &LatticeDomain,
    fixed: &[(u32, f64)],
    opts: SolveOptions,
) -> Result<HarmonicSolution> {
    if fixed.is_empty() {
        return Err(GscError::SingularSystem);
    }
    let mut sys = DirichletSystem::new(domain.graph());
    for &(node, value) in fixed {
        sys.pin(node, value);
    }
    let (values, stats) = solve_cg(&sys, opts)?;
    Ok(HarmonicSolution::assemble(domain, values, stats, Vec::new()))
}

/// Face-to-face conductance along `axis` under the given boundary rule.
pub fn resistance_energy(
    domain: &LatticeDomain,
    axis: u32,
    rule: BoundaryRule,
    opts: SolveOptions,
) -> Result<HarmonicSolution> {
    let side = domain.side();
    let mut sys = DirichletSystem::new(domain.graph());
    let lo = domain.tagged_nodes(&[(axis, 0)]);
    let hi = domain.tagged_nodes(&[(axis, 1)]);
    let mut half_edges = Vec::new();
    match rule {
        BoundaryRule::FaceContact => {
            let c2 = 2.0 * domain.conductance();
            for &v in &lo {
                sys.ground(v, c2, 0.0);
                half_edges.push((v, c2, 0.0));
            }
            for &v in &hi {
                sys.ground(v, c2, 1.0);
                half_edges.push((v, c2, 1.0));
            }
            // start from the exact affine profile of the solid cube
            for v in 0..domain.node_count() as u32 {
                let c = domain.node_coords(v)[axis as usize] as f64;
                sys.values[v as usize] = (c + 0.5) / side as f64;
            }
        }
        BoundaryRule::CellCenters => {
            if side < 2 {
                return Err(GscError::Contract(
                    "pinning cell centers needs at least two cells across".into(),
                ));
            }
            for &v in &lo {
                sys.pin(v, 0.0);
            }
            for &v in &hi {
                sys.pin(v, 1.0);
            }
            for v in 0..domain.node_count() as u32 {
                if !sys.fixed[v as usize] {
                    let c = domain.node_coords(v)[axis as usize] as f64;
                    sys.values[v as usize] = c / (side - 1) as f64;
                }
            }
        }
    }
    let (values, stats) = solve_cg(&sys, opts)?;
    Ok(HarmonicSolution::assemble(domain, values, stats, half_edges))
}

/// Minimum Dirichlet energy for 0/1 face data on the stage-`n` domain
/// at grid level `m_prime`, along axis 0.
pub fn raw_resistance(
    pattern: &GscPattern,
    n: u32,
    m_prime: u32,
    rule: BoundaryRule,
    node_cap: u64,
    opts: SolveOptions,
) -> Result<HarmonicSolution> {
    let domain = LatticeDomain::build(pattern, n, m_prime, node_cap)?;
    resistance_energy(&domain, 0, rule, opts)
}

/// One row of the resistance series.
#[derive(Debug, Clone)]
pub struct SeriesEntry {
    pub n: u32,
    pub m_prime: u32,
    pub d_value: f64,
    /// D_{n-1} / D_n
    pub ratio: f64,
    pub r_hat: f64,
    pub residual: f64,
    pub iterations: u32,
}

/// The resistance series with its derived scaling estimates.
#[derive(Debug, Clone)]
pub struct ResistanceSeries {
    pub entries: Vec<SeriesEntry>,
    /// stage-0 conductance backing the first ratio
    pub d0: f64,
    pub rho_hat: f64,
    /// least-squares line through the last three ratios, evaluated at
    /// the final stage; diagnostic only
    pub rho_hat_regression: Option<f64>,
    pub rhobar_hat: f64,
    pub walk_dim_hat: f64,
    pub spectral_dim_hat: f64,
    pub half_factor: bool,
}

/// Raw measurements for one stage, before normalization.
#[derive(Debug, Clone, Copy)]
pub struct StageMeasurement {
    pub n: u32,
    pub m_prime: u32,
    pub d_value: f64,
    pub residual: f64,
    pub iterations: u32,
}

impl ResistanceSeries {
    /// Derive the scaling estimates from per-stage conductances.
    /// `measurements` must cover n = 1..=n_max in order; `d0` is the
    /// stage-0 value.
    pub fn from_measurements(
        pattern: &GscPattern,
        d0_raw: f64,
        measurements: &[StageMeasurement],
        half_factor: bool,
    ) -> Result<Self> {
        if measurements.len() < 2 {
            return Err(GscError::Contract("resistance series needs n_max >= 2".into()));
        }
        let len = pattern.len_factor();
        let d = pattern.dim();
        let dims = pattern.dims()?;
        let scale = if half_factor { 0.5 } else { 1.0 };
        let d0 = d0_raw * scale;

        let mut ratios = Vec::with_capacity(measurements.len());
        let mut prev = d0;
        for m in measurements {
            let dv = m.d_value * scale;
            ratios.push(prev / dv);
            prev = dv;
        }
        let last = measurements.len() - 1;
        let lateral = math::powi(len as f64, -(d as i32 - 2));
        let rho_hat = ratios[last] * lateral;
        let rho_hat_regression = if measurements.len() >= 3 {
            let pts: Vec<(f64, f64)> = (last - 2..=last)
                .map(|i| (measurements[i].n as f64, ratios[i] * lateral))
                .collect();
            Some(line_fit_at(&pts, measurements[last].n as f64))
        } else {
            None
        };

        let report = dims.with_rho(len, rho_hat);
        let entries = measurements
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let dv = m.d_value * scale;
                let norm = math::powf(rho_hat, m.n as f64)
                    * math::powi(len as f64, (d as i32 - 2) * m.n as i32);
                SeriesEntry {
                    n: m.n,
                    m_prime: m.m_prime,
                    d_value: dv,
                    ratio: ratios[i],
                    r_hat: 1.0 / (norm * dv),
                    residual: m.residual,
                    iterations: m.iterations,
                }
            })
            .collect();

        Ok(ResistanceSeries {
            entries,
            d0,
            rho_hat,
            rho_hat_regression,
            rhobar_hat: report.rhobar_hat.expect("filled"),
            walk_dim_hat: report.walk_dim_hat.expect("filled"),
            spectral_dim_hat: report.spectral_dim_hat.expect("filled"),
            half_factor,
        })
    }
}

/// Run the whole series: D_n for n = 1..=n_max at m' = n + extra, plus
/// the stage-0 anchor at m' = max(extra, 1).
pub fn resistance_series(
    pattern: &GscPattern,
    n_max: u32,
    extra: u32,
    rule: BoundaryRule,
    half_factor: bool,
    node_cap: u64,
    opts: SolveOptions,
) -> Result<ResistanceSeries> {
    if n_max < 2 {
        return Err(GscError::Contract("resistance series needs n_max >= 2".into()));
    }
    let d0 = raw_resistance(pattern, 0, extra.max(1), rule, node_cap, opts)?.energy;
    let mut measurements = Vec::new();
    for n in 1..=n_max {
        let sol = raw_resistance(pattern, n, n + extra, rule, node_cap, opts)?;
        measurements.push(StageMeasurement {
            n,
            m_prime: n + extra,
            d_value: sol.energy,
            residual: sol.residual,
            iterations: sol.iterations,
        });
    }
    ResistanceSeries::from_measurements(pattern, d0, &measurements, half_factor)
}

/// Sup/inf of a positive harmonic function over the half ball.
#[derive(Debug, Clone, Copy)]
pub struct HarnackReport {
    pub sup: f64,
    pub inf: f64,
    pub ratio: f64,
    /// true when the inf is non-positive, i.e. the data was not a
    /// positive function
    pub degenerate: bool,
}

/// Fix `data` outside the ball, solve inside, and measure the
/// oscillation over the concentric half ball.
pub fn harnack_ratio<F: Fn(&[f64]) -> f64>(
    domain: &LatticeDomain,
    center: &[f64],
    radius: f64,
    data: F,
    opts: SolveOptions,
) -> Result<HarnackReport> {
    let n = domain.node_count() as u32;
    let mut sys = DirichletSystem::new(domain.graph());
    let mut inside = 0usize;
    for v in 0..n {
        let x = domain.node_center(v);
        if dist2(&x, center) >= radius * radius {
            sys.pin(v, data(&x));
        } else {
            inside += 1;
        }
    }
    if inside == 0 {
        return Err(GscError::Contract("ball contains no lattice nodes".into()));
    }
    let (values, _) = solve_cg(&sys, opts)?;
    let half = radius / 2.0;
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for v in 0..n {
        let x = domain.node_center(v);
        if dist2(&x, center) < half * half {
            sup = sup.max(values[v as usize]);
            inf = inf.min(values[v as usize]);
        }
    }
    if !sup.is_finite() || !inf.is_finite() {
        return Err(GscError::Contract("half ball contains no lattice nodes".into()));
    }
    let degenerate = inf <= 0.0;
    Ok(HarnackReport { sup, inf, ratio: if degenerate { f64::INFINITY } else { sup / inf }, degenerate })
}

/// One sample of the local variance-to-energy comparison.
#[derive(Debug, Clone, Copy)]
pub struct PoincareSample {
    /// phi-weighted mean-square deviation over the inner ball
    pub weighted_deviation: f64,
    /// normalized energy carried by edges of the outer ball
    pub local_energy: f64,
    pub ratio: f64,
    /// zero local energy against nonzero deviation: inconsistent
    pub flagged: bool,
}

/// Compare the mean-square deviation of `solution` over B(x, c r) with
/// its energy over B(x, r), weighted as the stage-`m` comparison
/// demands. `rho_hat` supplies the walk-dimension estimate.
pub fn poincare_ratio(
    domain: &LatticeDomain,
    solution: &HarmonicSolution,
    center: &[f64],
    radius: f64,
    c_factor: f64,
    rho_hat: f64,
) -> Result<PoincareSample> {
    if !(0.0 < c_factor && c_factor < 1.0) {
        return Err(GscError::Contract("ball shrink factor must be in (0,1)".into()));
    }
    let m = domain.domain_level();
    let pattern = domain.pattern();
    let phi = crate::boundary::phi(pattern, m, radius, rho_hat)?;
    let norm = crate::boundary::energy_normalization(pattern, m, rho_hat);

    let inner = c_factor * radius;
    let mut in_inner = Vec::new();
    let mut in_outer = vec![false; domain.node_count()];
    for v in 0..domain.node_count() as u32 {
        let x = domain.node_center(v);
        let d2 = dist2(&x, center);
        if d2 < inner * inner {
            in_inner.push(v);
        }
        if d2 < radius * radius {
            in_outer[v as usize] = true;
        }
    }
    if in_inner.is_empty() {
        return Err(GscError::Contract("inner ball contains no lattice nodes".into()));
    }
    let mean: f64 = in_inner.iter().map(|&v| solution.values[v as usize]).sum::<f64>()
        / in_inner.len() as f64;
    let dev: f64 = in_inner
        .iter()
        .map(|&v| {
            let d = solution.values[v as usize] - mean;
            d * d
        })
        .sum::<f64>()
        / in_inner.len() as f64;

    // straddling edges count half, matching the cell split rule
    let mut local = 0.0;
    domain.graph().for_each_edge(|u, v, c| {
        let w = (in_outer[u as usize] as u8 + in_outer[v as usize] as u8) as f64 * 0.5;
        if w > 0.0 {
            let d = solution.values[u as usize] - solution.values[v as usize];
            local += w * c * d * d;
        }
    });
    for &(node, c, pot) in solution.half_edges() {
        if in_outer[node as usize] {
            let d = solution.values[node as usize] - pot;
            local += c * d * d;
        }
    }
    let local_energy = norm * local;

    let weighted_deviation = phi * dev;
    let flagged = local_energy == 0.0 && weighted_deviation > 0.0;
    let ratio = if weighted_deviation == 0.0 {
        0.0
    } else if local_energy == 0.0 {
        f64::INFINITY
    } else {
        weighted_deviation / local_energy
    };
    Ok(PoincareSample { weighted_deviation, local_energy, ratio, flagged })
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn line_fit_at(points: &[(f64, f64)], at: f64) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return sy / n;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    intercept + slope * at
}
