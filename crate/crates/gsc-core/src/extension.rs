//! Explicit function constructions: multilinear corner interpolation,
//! bump-corrected face functions, average-prescribing extensions,
//! cutoff functions, and the minimal-energy boundary extension.
//!
//! The face machinery follows a three-step recipe: corner values are
//! equal-weight means of the incident faces' targets, each face gets
//! the multilinear interpolant of its corners plus a bump correction
//! that fixes its mean, and the rest of the lattice is filled
//! harmonically.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::GscError;
use crate::graph::{solve_cg, DirichletSystem, SolveOptions};
use crate::lattice::LatticeDomain;
use crate::math;
use crate::pattern::{pow_u64, CellIndex, GscPattern};
use crate::resistance::HarmonicSolution;
use crate::Result;

/// Values on the corners of the unit hypercube `{0,1}^q`, indexed by
/// the corner bitmask (bit j = coordinate j).
#[derive(Debug, Clone, PartialEq)]
pub struct CornerData {
    pub values: Vec<f64>,
}

impl CornerData {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !values.len().is_power_of_two() {
            return Err(GscError::InvalidInput("corner data needs 2^q values".into()));
        }
        Ok(CornerData { values })
    }

    pub fn arity(&self) -> usize {
        self.values.len().trailing_zeros() as usize
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// The unique continuous extension of corner values that is linear
/// along every axis-parallel segment.
pub fn multilinear_interp(u: &CornerData, x: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), u.arity());
    let mut acc = 0.0;
    for (corner, &value) in u.values.iter().enumerate() {
        let mut w = 1.0;
        for (j, &xi) in x.iter().enumerate() {
            w *= if corner >> j & 1 == 1 { xi } else { 1.0 - xi };
        }
        acc += w * value;
    }
    acc
}

/// The fixed bump: a product of parabolic arches, zero on the boundary
/// of the cube, unit mean, continuously differentiable.
pub fn bump(x: &[f64]) -> f64 {
    x.iter().map(|&t| 6.0 * t * (1.0 - t)).product()
}

/// A face function: multilinear part plus a bump multiple.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFunction {
    pub corners: CornerData,
    pub bump_coefficient: f64,
}

impl FaceFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        multilinear_interp(&self.corners, x) + self.bump_coefficient * bump(x)
    }
}

/// Adjust the interpolant of `u` so its cube mean becomes `a` without
/// touching its boundary values: the multilinear mean is the corner
/// mean, so the bump carries the difference.
pub fn bump_correct(u: CornerData, a: f64) -> FaceFunction {
    let coefficient = a - u.mean();
    FaceFunction { corners: u, bump_coefficient: coefficient }
}

/// One face of the prescription complex: the level-(n+m) face on the
/// hyperplane `x[axis] = plane * len^-(n+m)` spanning the unit box at
/// `transverse` in the remaining axes (coordinates at scale n+m).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PrescribedFace {
    pub axis: u32,
    pub plane: u64,
    pub transverse: Vec<u32>,
}

/// The prescription face set: for every retained level-`n` cell, the
/// images of the level-`m` outer sub-faces of the stage-`m` domain,
/// deduplicated (interfaces between two cells appear once) and sorted
/// by (axis, plane, transverse).
pub fn prescription_faces(pattern: &GscPattern, n: u32, m: u32) -> Vec<PrescribedFace> {
    let len = pattern.len_factor();
    let face_side = pow_u64(len, m);
    let mut set = BTreeSet::new();
    let subfaces = pattern.subfaces(m, m);
    for q in pattern.enumerate_cells(n) {
        for b in &subfaces {
            let axis = b.axis;
            let plane = q.coords[axis as usize] as u64 * face_side + b.plane();
            let transverse: Vec<u32> = (0..pattern.dim())
                .filter(|&j| j != axis)
                .map(|j| {
                    q.coords[j as usize] * face_side as u32 + b.cell.coords[j as usize]
                })
                .collect();
            set.insert(PrescribedFace { axis, plane, transverse });
        }
    }
    set.into_iter().collect()
}

/// Result of realizing prescribed face averages on the grid.
#[derive(Debug, Clone)]
pub struct PrescriptionOutcome {
    pub solution: HarmonicSolution,
    /// measured average over each face's touching nodes, aligned with
    /// the face order
    pub achieved: Vec<f64>,
    /// max |achieved - target|; the grid quadrature error of the face
    /// sampling
    pub max_error: f64,
}

/// Build the three-step prescription on the stage-(n+m) domain at grid
/// `m_prime`: corner means, bump-corrected face functions sampled onto
/// the face-touching node columns, harmonic fill elsewhere.
pub fn prescribe_averages(
    domain: &LatticeDomain,
    n: u32,
    m: u32,
    faces: &[PrescribedFace],
    targets: &[f64],
    opts: SolveOptions,
) -> Result<PrescriptionOutcome> {
    let pattern = domain.pattern();
    if domain.domain_level() != n + m {
        return Err(GscError::Contract(alloc::format!(
            "domain stage {} does not match n + m = {}",
            domain.domain_level(),
            n + m
        )));
    }
    if faces.len() != targets.len() {
        return Err(GscError::InvalidInput(alloc::format!(
            "{} faces but {} targets",
            faces.len(),
            targets.len()
        )));
    }
    if domain.grid_level() < n + m {
        return Err(GscError::Resolution { requested: n + m, available: domain.grid_level() });
    }
    let d = pattern.dim() as usize;

    // step 1: corner values average the incident faces' targets
    let mut corner_acc: BTreeMap<Vec<u64>, (f64, u32)> = BTreeMap::new();
    for (face, &target) in faces.iter().zip(targets.iter()) {
        for bits in 0..(1u32 << (d - 1)) {
            let vertex = face_corner(face, bits, d);
            let entry = corner_acc.entry(vertex).or_insert((0.0, 0));
            entry.0 += target;
            entry.1 += 1;
        }
    }
    let corner_value =
        |v: &Vec<u64>| -> f64 { let (s, c) = corner_acc[v]; s / c as f64 };

    // step 2: bump-corrected face functions
    let face_functions: Vec<FaceFunction> = faces
        .iter()
        .zip(targets.iter())
        .map(|(face, &target)| {
            let mut corners = Vec::with_capacity(1 << (d - 1));
            for bits in 0..(1u32 << (d - 1)) {
                corners.push(corner_value(&face_corner(face, bits, d)));
            }
            bump_correct(CornerData::new(corners).expect("power of two"), target)
        })
        .collect();

    // step 3: sample onto face-touching node columns, averaging where a
    // node touches several faces, then fill harmonically
    let scale = pow_u64(pattern.len_factor(), domain.grid_level() - (n + m));
    let side = domain.side();
    let mut node_acc: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
    let mut face_nodes: Vec<Vec<u32>> = vec![Vec::new(); faces.len()];
    for (fi, (face, func)) in faces.iter().zip(face_functions.iter()).enumerate() {
        let axis = face.axis as usize;
        let plane_fine = face.plane * scale;
        let mut offset = vec![0u64; d - 1];
        loop {
            let mut x = Vec::with_capacity(d - 1);
            for &o in &offset {
                x.push((o as f64 + 0.5) / scale as f64);
            }
            let sample = func.eval(&x);
            for node_col in [plane_fine.checked_sub(1), Some(plane_fine)] {
                let Some(col) = node_col else { continue };
                if col >= side {
                    continue;
                }
                let mut coords = vec![0u32; d];
                coords[axis] = col as u32;
                let mut t = 0;
                for j in 0..d {
                    if j != axis {
                        coords[j] =
                            (face.transverse[t] as u64 * scale + offset[t]) as u32;
                        t += 1;
                    }
                }
                if let Some(node) = domain.find_node(&coords) {
                    let entry = node_acc.entry(node).or_insert((0.0, 0));
                    entry.0 += sample;
                    entry.1 += 1;
                    face_nodes[fi].push(node);
                }
            }
            if d == 1 || !increment_u64(&mut offset, scale) {
                break;
            }
        }
    }

    let mut sys = DirichletSystem::new(domain.graph());
    for (&node, &(sum, count)) in &node_acc {
        sys.pin(node, sum / count as f64);
    }
    let (values, stats) = solve_cg(&sys, opts)?;
    let solution = HarmonicSolution::assemble(domain, values, stats, Vec::new());

    let mut achieved = Vec::with_capacity(faces.len());
    let mut max_error = 0.0f64;
    for (fi, nodes) in face_nodes.iter().enumerate() {
        if nodes.is_empty() {
            return Err(GscError::Resolution {
                requested: n + m,
                available: domain.grid_level(),
            });
        }
        let avg =
            nodes.iter().map(|&v| solution.values[v as usize]).sum::<f64>() / nodes.len() as f64;
        achieved.push(avg);
        max_error = max_error.max(math::abs(avg - targets[fi]));
    }
    Ok(PrescriptionOutcome { solution, achieved, max_error })
}

/// Measure the face averages of an existing solution over the
/// prescription complex; the natural way to build round-trip targets.
pub fn measure_face_averages(
    domain: &LatticeDomain,
    values: &[f64],
    faces: &[PrescribedFace],
) -> Result<Vec<f64>> {
    let pattern = domain.pattern();
    let level = domain.domain_level();
    if domain.grid_level() < level {
        return Err(GscError::Resolution { requested: level, available: domain.grid_level() });
    }
    let scale = pow_u64(pattern.len_factor(), domain.grid_level() - level);
    let side = domain.side();
    let d = pattern.dim() as usize;
    let mut out = Vec::with_capacity(faces.len());
    for face in faces {
        let axis = face.axis as usize;
        let plane_fine = face.plane * scale;
        let mut sum = 0.0;
        let mut count = 0u64;
        let mut offset = vec![0u64; d - 1];
        loop {
            for node_col in [plane_fine.checked_sub(1), Some(plane_fine)] {
                let Some(col) = node_col else { continue };
                if col >= side {
                    continue;
                }
                let mut coords = vec![0u32; d];
                coords[axis] = col as u32;
                let mut t = 0;
                for j in 0..d {
                    if j != axis {
                        coords[j] =
                            (face.transverse[t] as u64 * scale + offset[t]) as u32;
                        t += 1;
                    }
                }
                if let Some(node) = domain.find_node(&coords) {
                    sum += values[node as usize];
                    count += 1;
                }
            }
            if d == 1 || !increment_u64(&mut offset, scale) {
                break;
            }
        }
        if count == 0 {
            return Err(GscError::Resolution { requested: level, available: domain.grid_level() });
        }
        out.push(sum / count as f64);
    }
    Ok(out)
}

fn face_corner(face: &PrescribedFace, bits: u32, d: usize) -> Vec<u64> {
    let axis = face.axis as usize;
    let mut vertex = vec![0u64; d];
    vertex[axis] = face.plane;
    let mut t = 0;
    for j in 0..d {
        if j != axis {
            vertex[j] = face.transverse[t] as u64 + (bits as u64 >> t & 1);
            t += 1;
        }
    }
    vertex
}

/// Report of one cutoff construction.
#[derive(Debug, Clone)]
pub struct CutoffReport {
    pub solution: HarmonicSolution,
    /// the resistance weight at the cell scale
    pub phi_value: f64,
    /// stage-normalized energy of the cutoff
    pub normalized_energy: f64,
    /// normalized energy over phi; the quantity expected to stay
    /// bounded across stages
    pub ratio: f64,
}

/// The discrete cutoff of a cell: one on the cell, zero beyond its
/// neighbors, harmonic in between. `rho_hat` feeds the scale weight
/// used for the energy comparison.
pub fn cutoff(
    domain: &LatticeDomain,
    cell: &CellIndex,
    rho_hat: f64,
    opts: SolveOptions,
) -> Result<CutoffReport> {
    let nq = cell.level;
    if nq == 0 || nq > domain.domain_level() {
        return Err(GscError::Contract(alloc::format!(
            "cutoff cell level must be in 1..=domain level, got {nq}"
        )));
    }
    if !domain.pattern().retains(cell) {
        return Err(GscError::Contract(alloc::format!("cell {cell} is not retained")));
    }
    let n = domain.node_count() as u32;
    let mut sys = DirichletSystem::new(domain.graph());
    let mut far_count = 0usize;
    for v in 0..n {
        let anc = domain.node_cell(v, nq);
        let gap = anc
            .coords
            .iter()
            .zip(cell.coords.iter())
            .map(|(&a, &b)| (a as i64 - b as i64).abs())
            .max()
            .unwrap_or(0);
        if gap == 0 {
            sys.pin(v, 1.0);
        } else if gap >= 2 {
            sys.pin(v, 0.0);
            far_count += 1;
        }
    }
    if far_count == 0 {
        return Err(GscError::Contract(
            "every cell meets the cutoff cell; use a deeper level".into(),
        ));
    }
    let (values, stats) = solve_cg(&sys, opts)?;
    let solution = HarmonicSolution::assemble(domain, values, stats, Vec::new());
    let pattern = domain.pattern();
    let m = domain.domain_level();
    let phi_value = crate::boundary::phi(
        pattern,
        m,
        math::powi(pattern.len_factor() as f64, -(nq as i32)),
        rho_hat,
    )?;
    let normalized =
        crate::boundary::energy_normalization(pattern, m, rho_hat) * solution.energy;
    Ok(CutoffReport {
        phi_value,
        normalized_energy: normalized,
        ratio: normalized / phi_value,
        solution,
    })
}

/// Minimal-energy extension of data prescribed on every outer-boundary
/// node.
pub fn harmonic_extension(
    domain: &LatticeDomain,
    boundary_values: &[(u32, f64)],
    opts: SolveOptions,
) -> Result<HarmonicSolution> {
    let outer = domain.outer_nodes();
    let provided: BTreeSet<u32> = boundary_values.iter().map(|&(v, _)| v).collect();
    if provided.len() != boundary_values.len() {
        return Err(GscError::InvalidInput("duplicate boundary node".into()));
    }
    for &v in &outer {
        if !provided.contains(&v) {
            return Err(GscError::Contract(alloc::format!(
                "boundary data missing for outer node {v}"
            )));
        }
    }
    for &(v, _) in boundary_values {
        if domain.node_tags(v) == 0 {
            return Err(GscError::Contract(alloc::format!("node {v} is not on the outer boundary")));
        }
    }
    let mut sys = DirichletSystem::new(domain.graph());
    for &(v, value) in boundary_values {
        sys.pin(v, value);
    }
    let (values, stats) = solve_cg(&sys, opts)?;
    Ok(HarmonicSolution::assemble(domain, values, stats, Vec::new()))
}

fn increment_u64(counter: &mut [u64], base: u64) -> bool {
    let mut axis = counter.len();
    loop {
        if axis == 0 {
            return false;
        }
        axis -= 1;
        counter[axis] += 1;
        if counter[axis] < base {
            return true;
        }
        counter[axis] = 0;
    }
}
