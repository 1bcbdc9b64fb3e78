//! Carpet generator patterns and their cell/face combinatorics.
//!
//! A pattern is the complete description of a generalized carpet: the
//! ambient dimension `d`, the subdivision factor `len` (each cube splits
//! into `len^d` sub-cubes per level) and a boolean mask saying which
//! level-1 sub-cubes survive. Everything else in the crate is derived
//! from these three pieces of data.
//!
//! All geometry predicates work on integer lattice coordinates scaled by
//! `len^level`; no floating point enters any adjacency or containment
//! test.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::GscError;
use crate::math;
use crate::Result;

/// Largest supported ambient dimension. Node keys pack `d` coordinates
/// into a `u128`, which bounds `d * log2(len^level)`.
pub const MAX_DIM: u32 = 6;

/// Address of one level-`level` sub-cube: integer coordinates in
/// `[0, len^level)^d`, axis 0 varying slowest in the lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex {
    pub level: u32,
    pub coords: Vec<u32>,
}

impl CellIndex {
    pub fn new(level: u32, coords: Vec<u32>) -> Self {
        CellIndex { level, coords }
    }

    /// The whole unit cube.
    pub fn root(d: u32) -> Self {
        CellIndex { level: 0, coords: vec![0; d as usize] }
    }

    /// The digit tuple of this cell at refinement depth `k` (1-based,
    /// `k <= level`): the sub-cube index chosen at step `k` of the
    /// construction.
    pub fn digit_at(&self, k: u32, len: u32) -> Vec<u32> {
        debug_assert!(k >= 1 && k <= self.level);
        let shift = pow_u64(len, self.level - k);
        self.coords
            .iter()
            .map(|&c| ((c as u64 / shift) % len as u64) as u32)
            .collect()
    }

    /// The ancestor cell at a coarser level `k <= level`.
    pub fn ancestor(&self, k: u32, len: u32) -> CellIndex {
        debug_assert!(k <= self.level);
        let shift = pow_u64(len, self.level - k);
        CellIndex {
            level: k,
            coords: self.coords.iter().map(|&c| (c as u64 / shift) as u32).collect(),
        }
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:(", self.level)?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// One level-`k` piece of the outer boundary: the face of `cell` on the
/// hyperplane `x[axis] = side`, which must lie inside the boundary of
/// the unit cube.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SubFace {
    pub cell: CellIndex,
    pub axis: u32,
    pub side: u8,
}

impl SubFace {
    pub fn level(&self) -> u32 {
        self.cell.level
    }

    /// Scaled plane coordinate of the carrying hyperplane, in units of
    /// `len^-level`. Always 0 or `len^level` for outer sub-faces.
    pub fn plane(&self) -> u64 {
        if self.side == 0 {
            self.cell.coords[self.axis as usize] as u64
        } else {
            self.cell.coords[self.axis as usize] as u64 + 1
        }
    }

    /// Closed axis-aligned box of the sub-face in units of
    /// `len^-level`; the interval along `axis` is degenerate.
    pub fn bounding_box(&self) -> Vec<(u64, u64)> {
        let p = self.plane();
        self.cell
            .coords
            .iter()
            .enumerate()
            .map(|(t, &c)| {
                if t as u32 == self.axis {
                    (p, p)
                } else {
                    (c as u64, c as u64 + 1)
                }
            })
            .collect()
    }
}

/// Outcome of checking a single generator axiom.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheck {
    pub pass: bool,
    /// Human-readable witness of the failure, empty on pass.
    pub witness: String,
}

impl AxiomCheck {
    fn ok() -> Self {
        AxiomCheck { pass: true, witness: String::new() }
    }
    fn fail(witness: String) -> Self {
        AxiomCheck { pass: false, witness }
    }
}

/// Per-axiom validation outcome. A pattern is a valid generator iff all
/// four checks pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub symmetry: AxiomCheck,
    pub connectedness: AxiomCheck,
    pub non_diagonality: AxiomCheck,
    pub borders: AxiomCheck,
    /// Informational: false for the degenerate keep-all mask, which is
    /// accepted as the analytic-oracle case.
    pub proper_subset: bool,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.symmetry.pass
            && self.connectedness.pass
            && self.non_diagonality.pass
            && self.borders.pass
    }

    /// Name of the first failing axiom, if any.
    pub fn first_failure(&self) -> Option<&'static str> {
        for (name, check) in [
            ("Symmetry", &self.symmetry),
            ("Connectedness", &self.connectedness),
            ("Non-diagonality", &self.non_diagonality),
            ("Borders included", &self.borders),
        ] {
            if !check.pass {
                return Some(name);
            }
        }
        None
    }
}

/// Fractal and interface dimensions of a pattern, plus the slots filled
/// in once a resistance estimate is available.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionReport {
    pub kept_cells: u64,
    pub interface_cells: u64,
    pub fractal_dim: f64,
    pub interface_dim: f64,
    pub rho_hat: Option<f64>,
    pub rhobar_hat: Option<f64>,
    pub walk_dim_hat: Option<f64>,
    pub spectral_dim_hat: Option<f64>,
}

impl DimensionReport {
    /// Fill the derived-exponent slots from a resistance scaling
    /// estimate: walk dimension `log(rho * m_F) / log len`, spectral
    /// dimension `2 d_f / d_w`.
    pub fn with_rho(mut self, len: u32, rho_hat: f64) -> Self {
        let dw = math::ln(rho_hat * self.kept_cells as f64) / math::ln(len as f64);
        self.rho_hat = Some(rho_hat);
        self.rhobar_hat = Some(rho_hat * self.kept_cells as f64 / (len as f64 * len as f64));
        self.walk_dim_hat = Some(dw);
        self.spectral_dim_hat = Some(2.0 * self.fractal_dim / dw);
        self
    }
}

/// Result of a slab-removal connectivity probe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Connectivity {
    Connected,
    Disconnected { component_a: CellIndex, component_b: CellIndex },
    /// Removing the slabs left no cells at all.
    Empty,
}

/// Generator data of a generalized carpet: dimension, subdivision
/// factor, and the survival mask over the `len^d` level-1 sub-cubes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GscPattern {
    d: u32,
    len: u32,
    keep: Vec<bool>,
}

impl GscPattern {
    /// Build a pattern from an explicit mask in lexicographic cell order
    /// (axis 0 slowest). Only shape errors are caught here; axiom
    /// checking is `validate`.
    pub fn new(d: u32, len: u32, keep: Vec<bool>) -> Result<Self> {
        if d < 2 || d > MAX_DIM {
            return Err(GscError::InvalidInput(alloc::format!(
                "dimension must be in 2..={MAX_DIM}, got {d}"
            )));
        }
        if len < 3 {
            return Err(GscError::InvalidInput(alloc::format!(
                "subdivision factor must be at least 3, got {len}"
            )));
        }
        let expect = pow_checked(len, d).ok_or_else(|| {
            GscError::InvalidInput(alloc::format!("len^d overflows: {len}^{d}"))
        })?;
        if keep.len() as u64 != expect {
            return Err(GscError::InvalidInput(alloc::format!(
                "mask has {} entries, expected len^d = {expect}",
                keep.len()
            )));
        }
        if !keep.iter().any(|&k| k) {
            return Err(GscError::InvalidInput("mask keeps no cells".into()));
        }
        Ok(GscPattern { d, len, keep })
    }

    /// Build from the complement representation: every level-1 cell is
    /// kept except the listed ones.
    pub fn from_removed(d: u32, len: u32, removed: &[Vec<u32>]) -> Result<Self> {
        let total = pow_checked(len, d)
            .ok_or_else(|| GscError::InvalidInput(alloc::format!("len^d overflows: {len}^{d}")))?;
        let mut keep = vec![true; total as usize];
        let mut seen = BTreeSet::new();
        for tuple in removed {
            if tuple.len() as u32 != d {
                return Err(GscError::InvalidInput(alloc::format!(
                    "removed tuple has {} coordinates, expected {d}",
                    tuple.len()
                )));
            }
            if tuple.iter().any(|&c| c >= len) {
                return Err(GscError::InvalidInput(alloc::format!(
                    "removed tuple out of range 0..{len}"
                )));
            }
            if !seen.insert(tuple.clone()) {
                return Err(GscError::InvalidInput("duplicate removed tuple".into()));
            }
            let mut idx = 0usize;
            for &c in tuple {
                idx = idx * len as usize + c as usize;
            }
            keep[idx] = false;
        }
        GscPattern::new(d, len, keep)
    }

    /// The degenerate keep-all pattern; the carpet is the full cube.
    pub fn keep_all(d: u32, len: u32) -> Result<Self> {
        GscPattern::from_removed(d, len, &[])
    }

    /// Planar carpet with the centre ninth removed (d=2, len=3).
    pub fn standard_carpet() -> Self {
        GscPattern::from_removed(2, 3, &[vec![1, 1]]).expect("built-in pattern")
    }

    /// The d=3, len=3 sponge: the centre cell and the six face centres
    /// removed.
    pub fn sponge() -> Self {
        GscPattern::from_removed(
            3,
            3,
            &[
                vec![1, 1, 1],
                vec![0, 1, 1],
                vec![2, 1, 1],
                vec![1, 0, 1],
                vec![1, 2, 1],
                vec![1, 1, 0],
                vec![1, 1, 2],
            ],
        )
        .expect("built-in pattern")
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    pub fn len_factor(&self) -> u32 {
        self.len
    }

    /// Number of retained level-1 cells (`m_F`).
    pub fn kept_count(&self) -> u64 {
        self.keep.iter().filter(|&&k| k).count() as u64
    }

    pub fn mask(&self) -> &[bool] {
        &self.keep
    }

    /// Mask bytes in canonical order: one bit per cell, lexicographic
    /// (axis 0 slowest), most significant bit first within each byte.
    pub fn mask_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; (self.keep.len() + 7) / 8];
        for (i, &k) in self.keep.iter().enumerate() {
            if k {
                out[i / 8] |= 1 << (7 - (i % 8));
            }
        }
        out
    }

    fn mask_index(&self, tuple: &[u32]) -> usize {
        let mut idx = 0usize;
        for &c in tuple {
            idx = idx * self.len as usize + c as usize;
        }
        idx
    }

    /// Whether the level-1 cell addressed by `tuple` is retained.
    pub fn keeps(&self, tuple: &[u32]) -> bool {
        self.keep[self.mask_index(tuple)]
    }

    /// Whether a cell survives at its own level: every refinement digit
    /// along the way must address a retained sub-cube.
    pub fn retains(&self, cell: &CellIndex) -> bool {
        debug_assert_eq!(cell.coords.len() as u32, self.d);
        for k in 1..=cell.level {
            if !self.keeps(&cell.digit_at(k, self.len)) {
                return false;
            }
        }
        true
    }

    /// All level-1 index tuples in lexicographic order.
    fn level1_tuples(&self) -> Vec<Vec<u32>> {
        let mut out = Vec::with_capacity(self.keep.len());
        let mut cur = vec![0u32; self.d as usize];
        loop {
            out.push(cur.clone());
            let mut axis = self.d as usize;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                cur[axis] += 1;
                if cur[axis] < self.len {
                    break;
                }
                cur[axis] = 0;
            }
        }
    }

    /// Check the four generator axioms, each independently, with a
    /// witness for every failure.
    pub fn validate(&self) -> ValidationReport {
        ValidationReport {
            symmetry: self.check_symmetry(),
            connectedness: self.check_connectedness(),
            non_diagonality: self.check_non_diagonality(),
            borders: self.check_borders(),
            proper_subset: self.kept_count() < self.keep.len() as u64,
        }
    }

    /// `validate` folded into a Result, used as a precondition guard.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        match report.first_failure() {
            None => Ok(()),
            Some(axiom) => {
                let witness = match axiom {
                    "Symmetry" => report.symmetry.witness,
                    "Connectedness" => report.connectedness.witness,
                    "Non-diagonality" => report.non_diagonality.witness,
                    _ => report.borders.witness,
                };
                Err(GscError::InvalidPattern { axiom, detail: witness })
            }
        }
    }

    /// The mask must be invariant under the full symmetry group of the
    /// cube: all axis permutations composed with axis reflections.
    fn check_symmetry(&self) -> AxiomCheck {
        let perms = permutations(self.d as usize);
        let tuples = self.level1_tuples();
        for perm in &perms {
            for flips in 0..(1u32 << self.d) {
                for t in &tuples {
                    let mut image = vec![0u32; self.d as usize];
                    for (i, &p) in perm.iter().enumerate() {
                        let mut c = t[p];
                        if flips >> i & 1 == 1 {
                            c = self.len - 1 - c;
                        }
                        image[i] = c;
                    }
                    if self.keeps(t) != self.keeps(&image) {
                        return AxiomCheck::fail(alloc::format!(
                            "cell {t:?} maps to {image:?} under permutation {perm:?} with flip mask {flips:#b}, but only one is retained"
                        ));
                    }
                }
            }
        }
        AxiomCheck::ok()
    }

    /// The union of the retained open cells (with their shared faces) is
    /// connected exactly when the face-adjacency graph of kept cells is.
    fn check_connectedness(&self) -> AxiomCheck {
        let kept: Vec<Vec<u32>> =
            self.level1_tuples().into_iter().filter(|t| self.keeps(t)).collect();
        match components_of(&kept) {
            None => AxiomCheck::ok(),
            Some((a, b)) => AxiomCheck::fail(alloc::format!(
                "interior splits: cells {a:?} and {b:?} lie in different components"
            )),
        }
    }

    /// Non-diagonality, reduced to level 1. Any small cube that is a
    /// union of 2^d level-n cells straddles some subset of the level-1
    /// hyperplanes, and its intersection with the level-1 set is
    /// connected iff the kept cells around that straddle position form a
    /// face-connected block. Checking every axis subset of size >= 2 at
    /// level 1 therefore certifies the condition at all levels.
    fn check_non_diagonality(&self) -> AxiomCheck {
        let d = self.d as usize;
        for subset in 1u32..(1 << self.d) {
            if subset.count_ones() < 2 {
                continue;
            }
            let axes: Vec<usize> = (0..d).filter(|&i| subset >> i & 1 == 1).collect();
            let free: Vec<usize> = (0..d).filter(|&i| subset >> i & 1 == 0).collect();
            // corner positions along straddled axes, full range elsewhere
            let mut corner = vec![0u32; axes.len()];
            loop {
                let mut fixed = vec![0u32; free.len()];
                loop {
                    if let Some(pair) = self.diagonal_block(&axes, &corner, &free, &fixed) {
                        return AxiomCheck::fail(alloc::format!(
                            "2-block at axes {axes:?}, corner {corner:?}, fixed {fixed:?}: kept cells {:?} and {:?} are not face-connected within the block",
                            pair.0, pair.1
                        ));
                    }
                    if !increment(&mut fixed, self.len) {
                        break;
                    }
                }
                if !increment(&mut corner, self.len - 1) {
                    break;
                }
            }
        }
        AxiomCheck::ok()
    }

    /// Check one 2^|axes| block; returns a witness pair on failure.
    fn diagonal_block(
        &self,
        axes: &[usize],
        corner: &[u32],
        free: &[usize],
        fixed: &[u32],
    ) -> Option<(Vec<u32>, Vec<u32>)> {
        let mut cells = Vec::with_capacity(1 << axes.len());
        for bits in 0..(1u32 << axes.len()) {
            let mut t = vec![0u32; self.d as usize];
            for (j, &axis) in axes.iter().enumerate() {
                t[axis] = corner[j] + (bits >> j & 1);
            }
            for (j, &axis) in free.iter().enumerate() {
                t[axis] = fixed[j];
            }
            if self.keeps(&t) {
                cells.push(t);
            }
        }
        components_of(&cells)
    }

    /// Every cell touching the first coordinate axis segment must be
    /// retained; with symmetry this puts all edges of the cube in the
    /// carpet.
    fn check_borders(&self) -> AxiomCheck {
        for i in 0..self.len {
            let mut t = vec![0u32; self.d as usize];
            t[0] = i;
            if !self.keeps(&t) {
                return AxiomCheck::fail(alloc::format!(
                    "cell {t:?} touches the base segment but is removed"
                ));
            }
        }
        AxiomCheck::ok()
    }

    /// Brute-force non-diagonality at a given level, straight from the
    /// definition: every axis-aligned cube of side 2*len^-level. Used to
    /// cross-check the level-1 reduction in tests.
    pub fn non_diagonality_brute(&self, level: u32) -> bool {
        assert!(level >= 1);
        let side = pow_u64(self.len, level);
        let d = self.d as usize;
        let mut corner = vec![0u64; d];
        loop {
            let mut kept = Vec::new();
            for bits in 0..(1u32 << d) {
                let coords: Vec<u32> =
                    (0..d).map(|i| (corner[i] + (bits as u64 >> i & 1)) as u32).collect();
                // membership in the level-1 set only
                let ancestor: Vec<u32> = coords
                    .iter()
                    .map(|&c| (c as u64 / pow_u64(self.len, level - 1)) as u32)
                    .collect();
                if self.keeps(&ancestor) {
                    kept.push(coords);
                }
            }
            if components_of(&kept).is_some() {
                return false;
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    return true;
                }
                axis -= 1;
                corner[axis] += 1;
                if corner[axis] + 1 < side {
                    break;
                }
                corner[axis] = 0;
            }
        }
    }

    /// All cells of the carpet at level `n`, lexicographically ordered.
    pub fn enumerate_cells(&self, n: u32) -> Vec<CellIndex> {
        let mut cells = vec![CellIndex::root(self.d)];
        for _ in 0..n {
            cells = self.refine_cells(&cells);
        }
        cells.sort();
        cells
    }

    /// Cells of the level-`k` tiling that meet the stage-`m` domain:
    /// the carpet cells for `k <= m`, all refinements of the stage-`m`
    /// cells for `k > m`.
    pub fn enumerate_cells_stage(&self, m: u32, k: u32) -> Vec<CellIndex> {
        if k <= m {
            return self.enumerate_cells(k);
        }
        let mut cells = self.enumerate_cells(m);
        for _ in m..k {
            cells = refine_all(&cells, self.len, self.d);
        }
        cells.sort();
        cells
    }

    fn refine_cells(&self, cells: &[CellIndex]) -> Vec<CellIndex> {
        let mut out = Vec::with_capacity(cells.len() * self.kept_count() as usize);
        for cell in cells {
            for t in self.level1_tuples() {
                if !self.keeps(&t) {
                    continue;
                }
                let coords: Vec<u32> = cell
                    .coords
                    .iter()
                    .zip(t.iter())
                    .map(|(&c, &digit)| c * self.len + digit)
                    .collect();
                out.push(CellIndex::new(cell.level + 1, coords));
            }
        }
        out
    }

    /// Fractal dimension, interface cell count and interface dimension.
    /// The interface count is taken on every face and required to agree,
    /// which is what the symmetry axiom guarantees.
    pub fn dims(&self) -> Result<DimensionReport> {
        self.ensure_valid()?;
        let mut counts = Vec::new();
        for axis in 0..self.d {
            for side in 0..2u32 {
                let plane = if side == 0 { 0 } else { self.len - 1 };
                let count = self
                    .level1_tuples()
                    .iter()
                    .filter(|t| self.keeps(t) && t[axis as usize] == plane)
                    .count() as u64;
                counts.push(count);
            }
        }
        if counts.windows(2).any(|w| w[0] != w[1]) {
            return Err(GscError::InvalidPattern {
                axiom: "Symmetry",
                detail: alloc::format!("interface counts differ across faces: {counts:?}"),
            });
        }
        let m_f = self.kept_count();
        let m_i = counts[0];
        let log_len = math::ln(self.len as f64);
        Ok(DimensionReport {
            kept_cells: m_f,
            interface_cells: m_i,
            fractal_dim: math::ln(m_f as f64) / log_len,
            interface_dim: math::ln(m_i as f64) / log_len,
            rho_hat: None,
            rhobar_hat: None,
            walk_dim_hat: None,
            spectral_dim_hat: None,
        })
    }

    /// Level-`n` cells of the stage-`m` domain whose closed cube meets
    /// the boundary of the unit cube.
    pub fn boundary_shell(&self, m: u32, n: u32) -> Vec<CellIndex> {
        let side = pow_u64(self.len, n);
        self.enumerate_cells_stage(m, n)
            .into_iter()
            .filter(|c| c.coords.iter().any(|&x| x == 0 || x as u64 == side - 1))
            .collect()
    }

    /// Level-`k` sub-faces of the outer boundary of the stage-`m`
    /// domain, ordered by (cell, axis, side).
    pub fn subfaces(&self, m: u32, k: u32) -> Vec<SubFace> {
        let side = pow_u64(self.len, k);
        let mut out = Vec::new();
        for cell in self.enumerate_cells_stage(m, k) {
            for axis in 0..self.d {
                let c = cell.coords[axis as usize] as u64;
                if c == 0 {
                    out.push(SubFace { cell: cell.clone(), axis, side: 0 });
                }
                if c == side - 1 {
                    out.push(SubFace { cell: cell.clone(), axis, side: 1 });
                }
            }
        }
        out.sort();
        out
    }

    /// Adjacency over the level-`k` sub-faces: two distinct sub-faces
    /// are neighbours when their closed boxes intersect or when they sit
    /// inside the same level-(k-1) sub-face. Returns index pairs into
    /// the `subfaces(m, k)` ordering, `a < b`, sorted.
    pub fn subface_adjacency(&self, m: u32, k: u32) -> Result<Vec<(u32, u32)>> {
        if k == 0 {
            return Err(GscError::Contract(
                "sub-face adjacency needs level k >= 1 (level 0 has no parent faces)".into(),
            ));
        }
        let faces = self.subfaces(m, k);
        let boxes: Vec<Vec<(u64, u64)>> = faces.iter().map(|f| f.bounding_box()).collect();
        let parents: Vec<(u32, u8, CellIndex)> = faces
            .iter()
            .map(|f| (f.axis, f.side, f.cell.ancestor(k - 1, self.len)))
            .collect();
        let mut edges = Vec::new();
        for a in 0..faces.len() {
            for b in (a + 1)..faces.len() {
                let same_parent = parents[a].0 == parents[b].0
                    && parents[a].1 == parents[b].1
                    && parents[a].2 == parents[b].2;
                let touch = boxes_intersect(&boxes[a], &boxes[b]);
                if same_parent || touch {
                    edges.push((a as u32, b as u32));
                }
            }
        }
        Ok(edges)
    }

    /// Whether the level-`k` sub-face graph is connected.
    pub fn subface_graph_connected(&self, m: u32, k: u32) -> Result<bool> {
        let faces = self.subfaces(m, k);
        let edges = self.subface_adjacency(m, k)?;
        if faces.is_empty() {
            return Ok(false);
        }
        let mut adj = vec![Vec::new(); faces.len()];
        for &(a, b) in &edges {
            adj[a as usize].push(b as usize);
            adj[b as usize].push(a as usize);
        }
        let mut seen = vec![false; faces.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        Ok(count == faces.len())
    }

    /// Connectivity of the stage-`m` cell graph after removing every
    /// cell that lies entirely within distance `len^-slab_level / 2` of
    /// the faces in `face_set` (pairs of axis and side).
    pub fn connectivity_check(
        &self,
        m: u32,
        slab_level: u32,
        face_set: &[(u32, u8)],
    ) -> Result<Connectivity> {
        if slab_level == 0 {
            return Err(GscError::Contract("slab level must be >= 1".into()));
        }
        self.ensure_valid()?;
        let side = pow_u64(self.len, m) as u128;
        let slab_pow = pow_u64(self.len, slab_level) as u128;
        let kept: Vec<CellIndex> = self
            .enumerate_cells(m)
            .into_iter()
            .filter(|cell| {
                face_set.iter().all(|&(axis, s)| {
                    let c = cell.coords[axis as usize] as u128;
                    // keep the cell iff it reaches outside the open slab
                    if s == 0 {
                        2 * (c + 1) * slab_pow >= side
                    } else {
                        2 * (side - c) * slab_pow >= side
                    }
                })
            })
            .collect();
        if kept.is_empty() {
            return Ok(Connectivity::Empty);
        }
        let coords: Vec<Vec<u32>> = kept.iter().map(|c| c.coords.clone()).collect();
        match components_of(&coords) {
            None => Ok(Connectivity::Connected),
            Some((a, b)) => Ok(Connectivity::Disconnected {
                component_a: CellIndex::new(m, a),
                component_b: CellIndex::new(m, b),
            }),
        }
    }
}

/// Lexicographic odometer; returns false when the counter wraps.
fn increment(counter: &mut [u32], base: u32) -> bool {
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

fn refine_all(cells: &[CellIndex], len: u32, d: u32) -> Vec<CellIndex> {
    let mut out = Vec::with_capacity(cells.len() * pow_u64(len, d) as usize);
    for cell in cells {
        let mut digit = vec![0u32; d as usize];
        loop {
            let coords: Vec<u32> = cell
                .coords
                .iter()
                .zip(digit.iter())
                .map(|(&c, &t)| c * len + t)
                .collect();
            out.push(CellIndex::new(cell.level + 1, coords));
            if !increment(&mut digit, len) {
                break;
            }
        }
    }
    out
}

/// BFS over face adjacency on a cell list; None when connected (or
/// empty), otherwise a witness pair from two components.
fn components_of(cells: &[Vec<u32>]) -> Option<(Vec<u32>, Vec<u32>)> {
    if cells.len() <= 1 {
        return None;
    }
    let set: BTreeSet<&Vec<u32>> = cells.iter().collect();
    let mut seen = BTreeSet::new();
    let mut stack = vec![cells[0].clone()];
    seen.insert(cells[0].clone());
    while let Some(cur) = stack.pop() {
        for axis in 0..cur.len() {
            for delta in [-1i64, 1] {
                let c = cur[axis] as i64 + delta;
                if c < 0 {
                    continue;
                }
                let mut next = cur.clone();
                next[axis] = c as u32;
                if set.contains(&next) && !seen.contains(&next) {
                    seen.insert(next.clone());
                    stack.push(next);
                }
            }
        }
    }
    if seen.len() == cells.len() {
        None
    } else {
        let outside = cells.iter().find(|c| !seen.contains(*c)).expect("missing cell");
        Some((cells[0].clone(), outside.clone()))
    }
}

/// Closed boxes given as per-axis closed intervals.
fn boxes_intersect(a: &[(u64, u64)], b: &[(u64, u64)]) -> bool {
    a.iter().zip(b.iter()).all(|(&(lo1, hi1), &(lo2, hi2))| lo1 <= hi2 && lo2 <= hi1)
}

/// All permutations of 0..n in a deterministic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    heap_permute(&mut items, n, &mut out);
    out.sort();
    out
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

pub(crate) fn pow_u64(base: u32, exp: u32) -> u64 {
    (base as u64).checked_pow(exp).expect("level overflow")
}

fn pow_checked(base: u32, exp: u32) -> Option<u64> {
    (base as u64).checked_pow(exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_carpet_passes_all_axioms() {
        let report = GscPattern::standard_carpet().validate();
        assert!(report.all_pass(), "{report:?}");
        assert!(report.proper_subset);
    }

    #[test]
    fn keep_all_passes_all_axioms() {
        let report = GscPattern::keep_all(2, 3).unwrap().validate();
        assert!(report.all_pass());
        assert!(!report.proper_subset);
    }

    #[test]
    fn corner_only_pattern_fails_connectedness() {
        let mut keep = vec![false; 9];
        for idx in [0, 2, 6, 8] {
            keep[idx] = true;
        }
        let pattern = GscPattern::new(2, 3, keep).unwrap();
        let report = pattern.validate();
        assert!(!report.connectedness.pass);
        assert_eq!(report.first_failure(), Some("Connectedness"));
    }

    #[test]
    fn asymmetric_pattern_fails_symmetry() {
        // remove one off-centre cell; breaks every reflection
        let pattern = GscPattern::from_removed(2, 3, &[vec![1, 1], vec![0, 1]]).unwrap();
        let report = pattern.validate();
        assert!(!report.symmetry.pass);
    }

    #[test]
    fn missing_border_cell_fails_borders() {
        // removing the whole middle column keeps symmetry along x_2 only,
        // so force the failure via a mask that is symmetric but violates
        // the border axiom: impossible for d=2 without breaking symmetry,
        // so check the axiom in isolation.
        let pattern = GscPattern::from_removed(2, 3, &[vec![1, 0], vec![1, 2], vec![0, 1], vec![2, 1]]).unwrap();
        let report = pattern.validate();
        assert!(!report.borders.pass);
    }

    #[test]
    fn wrong_mask_size_is_input_error() {
        assert!(matches!(GscPattern::new(2, 3, vec![true; 8]), Err(GscError::InvalidInput(_))));
    }

    #[test]
    fn cell_counts_match_formula() {
        let sc = GscPattern::standard_carpet();
        assert_eq!(sc.enumerate_cells(0).len(), 1);
        assert_eq!(sc.enumerate_cells(1).len(), 8);
        assert_eq!(sc.enumerate_cells(2).len(), 64);
        let full = GscPattern::keep_all(2, 3).unwrap();
        assert_eq!(full.enumerate_cells(2).len(), 81);
    }

    #[test]
    fn enumerate_is_lexicographic() {
        let cells = GscPattern::standard_carpet().enumerate_cells(2);
        for w in cells.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn dims_standard_carpet() {
        let report = GscPattern::standard_carpet().dims().unwrap();
        assert_eq!(report.kept_cells, 8);
        assert_eq!(report.interface_cells, 3);
        assert!((report.fractal_dim - 8f64.ln() / 3f64.ln()).abs() < 1e-15);
        assert!((report.interface_dim - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dims_full_square_and_sponge() {
        let full = GscPattern::keep_all(2, 3).unwrap().dims().unwrap();
        assert_eq!(full.kept_cells, 9);
        assert!((full.fractal_dim - 2.0).abs() < 1e-15);
        assert_eq!(full.interface_cells, 3);

        let sponge = GscPattern::sponge().dims().unwrap();
        assert_eq!(sponge.kept_cells, 20);
        assert_eq!(sponge.interface_cells, 8);
    }

    #[test]
    fn dims_report_rho_slots() {
        let report = GscPattern::standard_carpet().dims().unwrap().with_rho(3, 1.25);
        let dw = (1.25f64 * 8.0).ln() / 3f64.ln();
        assert!((report.walk_dim_hat.unwrap() - dw).abs() < 1e-14);
        assert!((report.spectral_dim_hat.unwrap() - 2.0 * report.fractal_dim / dw).abs() < 1e-14);
        assert!((report.rhobar_hat.unwrap() - 1.25 * 8.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn boundary_shell_counts() {
        let sc = GscPattern::standard_carpet();
        assert_eq!(sc.boundary_shell(1, 1).len(), 8);
        let full = GscPattern::keep_all(2, 3).unwrap();
        assert_eq!(full.boundary_shell(2, 2).len(), 32);
    }

    #[test]
    fn boundary_shell_independent_of_stage() {
        let sc = GscPattern::standard_carpet();
        for n in 0..=2 {
            let at_n = sc.boundary_shell(n, n);
            for m in n..=3 {
                assert_eq!(sc.boundary_shell(m, n), at_n);
            }
        }
    }

    #[test]
    fn subface_counts() {
        let sc = GscPattern::standard_carpet();
        assert_eq!(sc.subfaces(1, 0).len(), 4);
        assert_eq!(sc.subfaces(1, 1).len(), 12);
        assert_eq!(sc.subfaces(2, 2).len(), 36);
        // 2d * m_I^k for planar patterns
        let dims = sc.dims().unwrap();
        for k in 0..=3 {
            let expect = 4 * dims.interface_cells.pow(k);
            assert_eq!(sc.subfaces(3, k).len() as u64, expect);
        }
    }

    #[test]
    fn subface_adjacency_level_zero_rejected() {
        let sc = GscPattern::standard_carpet();
        assert!(matches!(sc.subface_adjacency(1, 0), Err(GscError::Contract(_))));
    }

    #[test]
    fn subface_adjacency_no_self_loops_and_connected() {
        let sc = GscPattern::standard_carpet();
        let edges = sc.subface_adjacency(1, 1).unwrap();
        assert!(edges.iter().all(|&(a, b)| a != b));
        assert!(sc.subface_graph_connected(1, 1).unwrap());
        assert!(sc.subface_graph_connected(2, 2).unwrap());
    }

    #[test]
    fn side_subfaces_form_a_path_plus_corner_links() {
        // on one side of the standard carpet the three sub-faces form a
        // path; corner sub-faces also link to the neighbouring side
        let sc = GscPattern::standard_carpet();
        let faces = sc.subfaces(1, 1);
        let edges = sc.subface_adjacency(1, 1).unwrap();
        let left: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.axis == 0 && f.side == 0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(left.len(), 3);
        let has = |a: usize, b: usize| {
            let (a, b) = (a.min(b) as u32, a.max(b) as u32);
            edges.contains(&(a, b))
        };
        // all three pairs adjacent: consecutive by intersection, the far
        // pair through the shared level-0 parent face
        assert!(has(left[0], left[1]) && has(left[1], left[2]) && has(left[0], left[2]));
        // the corner cell's left face meets the bottom side's corner face
        let bottom_corner = faces
            .iter()
            .position(|f| f.axis == 1 && f.side == 0 && f.cell.coords == vec![0, 0])
            .unwrap();
        let left_corner = faces
            .iter()
            .position(|f| f.axis == 0 && f.side == 0 && f.cell.coords == vec![0, 0])
            .unwrap();
        assert!(has(bottom_corner, left_corner));
    }

    #[test]
    fn non_diagonality_brute_force_agrees_with_level1_reduction() {
        for pattern in [
            GscPattern::standard_carpet(),
            GscPattern::keep_all(2, 3).unwrap(),
            GscPattern::sponge(),
        ] {
            let fast = pattern.validate().non_diagonality.pass;
            for level in 1..=2 {
                assert_eq!(pattern.non_diagonality_brute(level), fast);
            }
        }
        // level 3 spot check on the planar patterns only (cheap)
        assert!(GscPattern::standard_carpet().non_diagonality_brute(3));
    }

    #[test]
    fn slab_connectivity_checks() {
        let sc = GscPattern::standard_carpet();
        assert_eq!(sc.connectivity_check(3, 1, &[(0, 0)]).unwrap(), Connectivity::Connected);
        assert_eq!(
            sc.connectivity_check(3, 1, &[(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap(),
            Connectivity::Connected
        );
        let full = GscPattern::keep_all(2, 3).unwrap();
        assert_eq!(full.connectivity_check(2, 1, &[(0, 0), (1, 1)]).unwrap(), Connectivity::Connected);
    }

    #[test]
    fn retains_checks_every_digit() {
        let sc = GscPattern::standard_carpet();
        assert!(sc.retains(&CellIndex::new(2, vec![0, 3])));
        // level-2 cell inside the removed centre
        assert!(!sc.retains(&CellIndex::new(2, vec![4, 4])));
        // kept level-1 parent, removed level-2 digit
        assert!(!sc.retains(&CellIndex::new(2, vec![1, 4])));
    }

    #[test]
    fn mask_bytes_row_major_bit_order() {
        let sc = GscPattern::standard_carpet();
        // cells 0..8 lexicographic; centre (1,1) has rank 4
        assert_eq!(sc.mask_bytes(), vec![0b1111_0111, 0b1000_0000]);
    }
}
