//! Finite lattice realizations of the pre-carpet domains.
//!
//! A `LatticeDomain` is the stage-`m` domain materialized as the graph
//! of its level-`m'` cells (`m' >= m`): one node per cell, an edge where
//! two cells share a full (d-1)-face. Node order is lexicographic over
//! cell coordinates, axis 0 slowest, and every downstream iteration
//! order derives from it.
//!
//! Edge conductance is `len^-(d-2) m'`, the value for which the graph
//! energy of a sampled smooth function approximates its gradient energy
//! against Lebesgue measure; in the plane it is exactly 1.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::GscError;
use crate::graph::{CsrGraph, EdgeWeights};
use crate::math;
use crate::pattern::{pow_u64, CellIndex, GscPattern, SubFace};
use crate::Result;

/// Default ceiling on the node count of a single lattice build.
pub const DEFAULT_NODE_CAP: u64 = 2_000_000;

/// The normalized surface measure on the outer boundary, restricted to
/// one sub-face level. The boundary is self-similar, so at a fixed
/// level every sub-face carries the same weight and node averages
/// within a sub-face are unweighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceMeasure {
    level: u32,
    face_count: u64,
}

impl FaceMeasure {
    /// The measure over the level-`k` sub-faces of the stage-`m`
    /// domain's outer boundary.
    pub fn new(pattern: &GscPattern, m: u32, k: u32) -> Self {
        FaceMeasure { level: k, face_count: pattern.subfaces(m, k).len() as u64 }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn face_count(&self) -> u64 {
        self.face_count
    }

    /// Weight of a single sub-face; identical across the level.
    pub fn weight(&self) -> f64 {
        1.0 / self.face_count as f64
    }

    /// Total mass over the level; exactly one by construction.
    pub fn total(&self) -> f64 {
        self.weight() * self.face_count as f64
    }
}

/// The stage-`m` domain as a graph of level-`m'` cells.
#[derive(Debug, Clone)]
pub struct LatticeDomain {
    pattern: GscPattern,
    domain_level: u32,
    grid_level: u32,
    /// sorted packed coordinates, one per node
    keys: Vec<u128>,
    graph: CsrGraph,
    /// bit 2*axis + side set when the node's cube touches that face of
    /// the unit cube
    tags: Vec<u16>,
}

impl LatticeDomain {
    /// Materialize the graph. Fails before allocating anything large if
    /// the node count would exceed `node_cap` (0 = default cap).
    pub fn build(pattern: &GscPattern, m: u32, m_prime: u32, node_cap: u64) -> Result<Self> {
        if m_prime < m {
            return Err(GscError::Contract(alloc::format!(
                "grid level {m_prime} must refine the domain level {m}"
            )));
        }
        pattern.ensure_valid()?;
        let cap = if node_cap == 0 { DEFAULT_NODE_CAP } else { node_cap };
        let d = pattern.dim();
        let len = pattern.len_factor();
        // checked throughout: absurd levels degrade to a size error, not
        // an arithmetic panic
        let expected = (len as u128)
            .checked_pow(m_prime - m)
            .and_then(|s| s.checked_pow(d))
            .and_then(|per_cell| (pattern.kept_count() as u128).checked_pow(m)?.checked_mul(per_cell));
        let expected = match expected {
            Some(nodes) if nodes <= cap as u128 => nodes,
            Some(nodes) => return Err(GscError::SizeLimit { nodes, cap }),
            None => return Err(GscError::SizeLimit { nodes: u128::MAX, cap }),
        };
        let side = pow_u64(len, m_prime);
        check_key_range(side, d)?;

        // all level-m' cells inside the stage-m domain, as packed keys
        let scale = pow_u64(len, m_prime - m);
        let strides = strides_for(side, d);
        let mut keys = Vec::with_capacity(expected as usize);
        for cell in pattern.enumerate_cells(m) {
            let base: Vec<u64> = cell.coords.iter().map(|&c| c as u64 * scale).collect();
            let mut offset = vec![0u64; d as usize];
            loop {
                let mut key = 0u128;
                for i in 0..d as usize {
                    key += (base[i] + offset[i]) as u128 * strides[i];
                }
                keys.push(key);
                if !increment_u64(&mut offset, scale) {
                    break;
                }
            }
        }
        keys.sort_unstable();
        debug_assert_eq!(keys.len() as u128, expected);

        // face adjacency by key lookup
        let n = keys.len();
        let mut row_ptr = vec![0u32; n + 1];
        let mut cols: Vec<u32> = Vec::with_capacity(n * 2 * d as usize);
        for (i, &key) in keys.iter().enumerate() {
            for axis in 0..d as usize {
                let c = (key / strides[axis]) % side as u128;
                for dir in [-1i64, 1] {
                    let cc = c as i64 + dir;
                    if cc < 0 || cc as u64 >= side {
                        continue;
                    }
                    let nkey = if dir < 0 { key - strides[axis] } else { key + strides[axis] };
                    if let Ok(j) = keys.binary_search(&nkey) {
                        cols.push(j as u32);
                    }
                }
            }
            row_ptr[i + 1] = cols.len() as u32;
        }
        for i in 0..n {
            let (lo, hi) = (row_ptr[i] as usize, row_ptr[i + 1] as usize);
            cols[lo..hi].sort_unstable();
        }

        let conductance = conductance_for(len, d, m_prime);
        let graph = CsrGraph::new(row_ptr, cols, EdgeWeights::Uniform(conductance));

        let mut tags = vec![0u16; n];
        for (i, &key) in keys.iter().enumerate() {
            let mut t = 0u16;
            for axis in 0..d as usize {
                let c = ((key / strides[axis]) % side as u128) as u64;
                if c == 0 {
                    t |= 1 << (2 * axis);
                }
                if c == side - 1 {
                    t |= 1 << (2 * axis + 1);
                }
            }
            tags[i] = t;
        }

        let domain =
            LatticeDomain { pattern: pattern.clone(), domain_level: m, grid_level: m_prime, keys, graph, tags };
        if !domain.graph.is_connected() {
            return Err(GscError::Contract(
                "lattice graph is disconnected; the pattern should not allow this".into(),
            ));
        }
        Ok(domain)
    }

    pub fn pattern(&self) -> &GscPattern {
        &self.pattern
    }

    pub fn domain_level(&self) -> u32 {
        self.domain_level
    }

    pub fn grid_level(&self) -> u32 {
        self.grid_level
    }

    pub fn graph(&self) -> &CsrGraph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.keys.len()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    /// Grid spacing `len^-m'`.
    pub fn spacing(&self) -> f64 {
        math::powi(self.pattern.len_factor() as f64, -(self.grid_level as i32))
    }

    /// Conductance carried by every lattice edge.
    pub fn conductance(&self) -> f64 {
        conductance_for(self.pattern.len_factor(), self.pattern.dim(), self.grid_level)
    }

    /// Uniform node weight of the normalized volume measure.
    pub fn node_measure(&self) -> f64 {
        1.0 / self.keys.len() as f64
    }

    pub fn side(&self) -> u64 {
        pow_u64(self.pattern.len_factor(), self.grid_level)
    }

    fn strides(&self) -> Vec<u128> {
        strides_for(self.side(), self.pattern.dim())
    }

    pub fn node_coords(&self, node: u32) -> Vec<u32> {
        let side = self.side() as u128;
        let strides = self.strides();
        strides.iter().map(|&s| ((self.keys[node as usize] / s) % side) as u32).collect()
    }

    /// Node centre in unit-cube coordinates.
    pub fn node_center(&self, node: u32) -> Vec<f64> {
        let h = self.spacing();
        self.node_coords(node).iter().map(|&c| (c as f64 + 0.5) * h).collect()
    }

    pub fn find_node(&self, coords: &[u32]) -> Option<u32> {
        let strides = self.strides();
        let key: u128 =
            coords.iter().zip(strides.iter()).map(|(&c, &s)| c as u128 * s).sum();
        self.keys.binary_search(&key).ok().map(|i| i as u32)
    }

    /// Faces of the unit cube this node's cube touches, as a bitmask
    /// with bit `2*axis + side`.
    pub fn node_tags(&self, node: u32) -> u16 {
        self.tags[node as usize]
    }

    pub fn touches(&self, node: u32, axis: u32, side: u8) -> bool {
        self.tags[node as usize] >> (2 * axis + side as u32) & 1 == 1
    }

    /// Nodes touching any face in the given (axis, side) set.
    pub fn tagged_nodes(&self, faces: &[(u32, u8)]) -> Vec<u32> {
        let mut mask = 0u16;
        for &(axis, side) in faces {
            mask |= 1 << (2 * axis + side as u32);
        }
        (0..self.keys.len() as u32).filter(|&i| self.tags[i as usize] & mask != 0).collect()
    }

    /// Nodes on the outer boundary (touching any face of the unit cube).
    pub fn outer_nodes(&self) -> Vec<u32> {
        (0..self.keys.len() as u32).filter(|&i| self.tags[i as usize] != 0).collect()
    }

    /// Ancestor cell of a node at a coarser level.
    pub fn node_cell(&self, node: u32, level: u32) -> CellIndex {
        debug_assert!(level <= self.grid_level);
        let shift = pow_u64(self.pattern.len_factor(), self.grid_level - level);
        let coords =
            self.node_coords(node).iter().map(|&c| (c as u64 / shift) as u32).collect();
        CellIndex::new(level, coords)
    }

    /// Packed key of the node's ancestor cell, cheap enough for
    /// per-edge use.
    pub fn node_cell_key(&self, node: u32, level: u32) -> u128 {
        let shift = pow_u64(self.pattern.len_factor(), self.grid_level - level) as u128;
        let side = self.side() as u128;
        let mut key = 0u128;
        let mut acc = self.keys[node as usize];
        // unpack from the last axis upward, repack at the coarser level
        let d = self.pattern.dim() as usize;
        let mut coords = vec![0u128; d];
        for i in (0..d).rev() {
            coords[i] = acc % side;
            acc /= side;
        }
        let coarse_side = side / shift;
        for c in coords {
            key = key * coarse_side + c / shift;
        }
        key
    }

    /// The sub-domain over one retained cell, re-based to the unit cube.
    /// Node and edge sets equal a fresh build of the scaled-down stage.
    pub fn restrict_to_cell(&self, q: &CellIndex) -> Result<LatticeDomain> {
        let nq = q.level;
        if nq > self.domain_level {
            return Err(GscError::Contract(alloc::format!(
                "cell level {nq} exceeds domain level {}",
                self.domain_level
            )));
        }
        if !self.pattern.retains(q) {
            return Err(GscError::Contract(alloc::format!("cell {q} is not retained")));
        }
        let len = self.pattern.len_factor();
        let d = self.pattern.dim();
        let sub_grid = self.grid_level - nq;
        let scale = pow_u64(len, sub_grid);
        let sub_side = scale;
        let sub_strides = strides_for(sub_side, d);
        let strides = self.strides();
        let side = self.side() as u128;

        // select nodes inside q and re-base
        let mut picked: Vec<(u128, u32)> = Vec::new();
        for (i, &key) in self.keys.iter().enumerate() {
            let mut inside = true;
            let mut sub_key = 0u128;
            for axis in 0..d as usize {
                let c = ((key / strides[axis]) % side) as u64;
                let base = q.coords[axis] as u64 * scale;
                if c < base || c >= base + scale {
                    inside = false;
                    break;
                }
                sub_key += (c - base) as u128 * sub_strides[axis];
            }
            if inside {
                picked.push((sub_key, i as u32));
            }
        }
        picked.sort_unstable();
        let keys: Vec<u128> = picked.iter().map(|&(k, _)| k).collect();
        let old_of_new: Vec<u32> = picked.iter().map(|&(_, i)| i).collect();
        let mut new_of_old = vec![u32::MAX; self.keys.len()];
        for (new, &old) in old_of_new.iter().enumerate() {
            new_of_old[old as usize] = new as u32;
        }

        // induced subgraph
        let n = keys.len();
        let mut row_ptr = vec![0u32; n + 1];
        let mut cols = Vec::new();
        for (new, &old) in old_of_new.iter().enumerate() {
            for &nb in self.graph.neighbors(old) {
                let mapped = new_of_old[nb as usize];
                if mapped != u32::MAX {
                    cols.push(mapped);
                }
            }
            row_ptr[new + 1] = cols.len() as u32;
        }
        for i in 0..n {
            let (lo, hi) = (row_ptr[i] as usize, row_ptr[i + 1] as usize);
            cols[lo..hi].sort_unstable();
        }
        let conductance = conductance_for(len, d, sub_grid);
        let graph = CsrGraph::new(row_ptr, cols, EdgeWeights::Uniform(conductance));

        let mut tags = vec![0u16; n];
        for (i, &key) in keys.iter().enumerate() {
            let mut t = 0u16;
            for axis in 0..d as usize {
                let c = ((key / sub_strides[axis]) % sub_side as u128) as u64;
                if c == 0 {
                    t |= 1 << (2 * axis);
                }
                if c == sub_side - 1 {
                    t |= 1 << (2 * axis + 1);
                }
            }
            tags[i] = t;
        }

        Ok(LatticeDomain {
            pattern: self.pattern.clone(),
            domain_level: self.domain_level - nq,
            grid_level: sub_grid,
            keys,
            graph,
            tags,
        })
    }

    /// Nodes whose cubes meet a given outer sub-face, in node order.
    /// The sub-face must carry at least one node, i.e. the grid must be
    /// at least as fine as the sub-face level.
    pub fn face_nodes(&self, face: &SubFace) -> Result<Vec<u32>> {
        let len = self.pattern.len_factor();
        let d = self.pattern.dim();
        let k = face.level();
        let face_side = pow_u64(len, k);
        let on_boundary = {
            let c = face.cell.coords[face.axis as usize] as u64;
            (face.side == 0 && c == 0) || (face.side == 1 && c == face_side - 1)
        };
        if !on_boundary {
            return Err(GscError::Contract(
                "only outer sub-faces carry boundary data in this lattice".into(),
            ));
        }
        if k > self.grid_level {
            return Err(GscError::Resolution { requested: k, available: self.grid_level });
        }
        let scale = pow_u64(len, self.grid_level - k);
        let side = self.side();
        let axis = face.axis as usize;
        let col = if face.side == 0 { 0 } else { side - 1 };

        // odometer over the transverse extent
        let d_t = d as usize - 1;
        let mut out = Vec::new();
        let mut offset = vec![0u64; d_t];
        loop {
            let mut coords = vec![0u32; d as usize];
            coords[axis] = col as u32;
            let mut t = 0;
            for j in 0..d as usize {
                if j != axis {
                    coords[j] = (face.cell.coords[j] as u64 * scale + offset[t]) as u32;
                    t += 1;
                }
            }
            if let Some(node) = self.find_node(&coords) {
                out.push(node);
            }
            if d_t == 0 || !increment_u64(&mut offset, scale) {
                break;
            }
        }
        if out.is_empty() {
            return Err(GscError::Resolution { requested: k, available: self.grid_level });
        }
        out.sort_unstable();
        Ok(out)
    }
}

fn conductance_for(len: u32, d: u32, m_prime: u32) -> f64 {
    math::powi(len as f64, -((d as i32 - 2) * m_prime as i32))
}

fn strides_for(side: u64, d: u32) -> Vec<u128> {
    let mut strides = vec![1u128; d as usize];
    for i in (0..d as usize - 1).rev() {
        strides[i] = strides[i + 1] * side as u128;
    }
    strides
}

fn check_key_range(side: u64, d: u32) -> Result<()> {
    let bits = 128 - (side as u128).leading_zeros();
    if bits as u64 * d as u64 > 126 {
        return Err(GscError::InvalidInput(alloc::format!(
            "lattice coordinates do not fit packed keys: side {side}, dimension {d}"
        )));
    }
    Ok(())
}

/// Odometer with a uniform base; false on wrap.
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
