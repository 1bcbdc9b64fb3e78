//! Geometry invariants checked against independent brute-force
//! enumeration over the pattern corpus.

mod common;

use common::{brute_cells, corpus};
use gsc_core::pattern::{Connectivity, GscPattern};

#[test]
fn corpus_is_valid() {
    for (name, pattern) in corpus() {
        let report = pattern.validate();
        assert!(report.all_pass(), "{name}: {report:?}");
    }
}

#[test]
fn cell_enumeration_matches_brute_force_and_formula() {
    for (name, pattern) in corpus() {
        let depth = if pattern.dim() == 2 { 3 } else { 2 };
        for n in 0..=depth {
            let cells = pattern.enumerate_cells(n);
            let brute = brute_cells(&pattern, n);
            assert_eq!(cells.len() as u64, pattern.kept_count().pow(n), "{name} n={n}");
            let coords: Vec<Vec<u32>> = cells.into_iter().map(|c| c.coords).collect();
            assert_eq!(coords, brute, "{name} n={n}");
        }
    }
}

#[test]
fn interface_count_same_on_every_face() {
    for (name, pattern) in corpus() {
        let d = pattern.dim();
        let len = pattern.len_factor();
        let dims = pattern.dims().unwrap();
        for axis in 0..d {
            for side in [0u32, 1] {
                let plane = if side == 0 { 0 } else { len - 1 };
                let count = brute_cells(&pattern, 1)
                    .iter()
                    .filter(|t| t[axis as usize] == plane)
                    .count() as u64;
                assert_eq!(count, dims.interface_cells, "{name} axis {axis} side {side}");
            }
        }
    }
}

#[test]
fn boundary_shell_matches_brute_force() {
    for (name, pattern) in corpus() {
        let depth = if pattern.dim() == 2 { 3 } else { 2 };
        for m in 0..=depth {
            for n in 0..=m {
                let side = (pattern.len_factor() as u64).pow(n);
                let brute: Vec<Vec<u32>> = brute_cells(&pattern, n)
                    .into_iter()
                    .filter(|c| c.iter().any(|&x| x == 0 || x as u64 == side - 1))
                    .collect();
                let shell: Vec<Vec<u32>> = pattern
                    .boundary_shell(m, n)
                    .into_iter()
                    .map(|c| c.coords)
                    .collect();
                assert_eq!(shell, brute, "{name} m={m} n={n}");
            }
        }
    }
}

#[test]
fn subface_count_formula_in_the_plane() {
    for (name, pattern) in corpus() {
        if pattern.dim() != 2 {
            continue;
        }
        let dims = pattern.dims().unwrap();
        for k in 0..=3u32 {
            let expect = 4 * dims.interface_cells.pow(k);
            assert_eq!(pattern.subfaces(3, k).len() as u64, expect, "{name} k={k}");
        }
    }
}

#[test]
fn subface_count_by_enumeration_in_three_dimensions() {
    for (name, pattern) in corpus() {
        if pattern.dim() != 3 {
            continue;
        }
        // count faces of level-k cells lying on the cube boundary
        for k in 0..=2u32 {
            let side = (pattern.len_factor() as u64).pow(k);
            let mut count = 0u64;
            for cell in brute_cells(&pattern, k) {
                for &c in &cell {
                    if c == 0 {
                        count += 1;
                    }
                    if c as u64 == side - 1 {
                        count += 1;
                    }
                }
            }
            assert_eq!(pattern.subfaces(2, k).len() as u64, count, "{name} k={k}");
        }
    }
}

#[test]
fn subface_counts_below_the_stage_level() {
    // finer than the stage: every sub-face of a kept stage cell
    // refines fully, so counts grow by the solid factor len^(d-1)
    let sponge = GscPattern::sponge();
    let at_stage = sponge.subfaces(1, 1).len();
    assert_eq!(sponge.subfaces(1, 2).len(), at_stage * 9);
    let sc = GscPattern::standard_carpet();
    assert_eq!(sc.subfaces(1, 2).len(), sc.subfaces(1, 1).len() * 3);
}

#[test]
fn subface_graph_is_connected_across_corpus() {
    for (name, pattern) in corpus() {
        assert!(pattern.subface_graph_connected(2, 1).unwrap(), "{name} k=1");
        if pattern.dim() == 2 {
            assert!(pattern.subface_graph_connected(3, 2).unwrap(), "{name} k=2");
        }
    }
}

#[test]
fn subface_adjacency_matches_brute_force_boxes() {
    // independent adjacency rule: rational interval intersection plus
    // the shared-parent test, written directly against the face data
    for (name, pattern) in corpus() {
        let len = pattern.len_factor();
        let k = 2u32;
        let faces = pattern.subfaces(2, k);
        let edges = pattern.subface_adjacency(2, k).unwrap();
        let mut expect = Vec::new();
        for a in 0..faces.len() {
            for b in (a + 1)..faces.len() {
                let fa = &faces[a];
                let fb = &faces[b];
                let inter = (0..pattern.dim() as usize).all(|t| {
                    let ia = interval(fa, t as u32);
                    let ib = interval(fb, t as u32);
                    ia.0 <= ib.1 && ib.0 <= ia.1
                });
                let same_parent = fa.axis == fb.axis
                    && fa.side == fb.side
                    && fa.cell.ancestor(k - 1, len) == fb.cell.ancestor(k - 1, len);
                if inter || same_parent {
                    expect.push((a as u32, b as u32));
                }
            }
        }
        assert_eq!(edges, expect, "{name}");
    }
}

fn interval(face: &gsc_core::pattern::SubFace, axis: u32) -> (u64, u64) {
    let c = face.cell.coords[axis as usize] as u64;
    if axis == face.axis {
        let p = if face.side == 0 { c } else { c + 1 };
        (p, p)
    } else {
        (c, c + 1)
    }
}

#[test]
fn non_diagonality_reduction_is_faithful_on_corpus() {
    for (name, pattern) in corpus() {
        let fast = pattern.validate().non_diagonality.pass;
        let deep = if pattern.dim() == 2 { 3 } else { 2 };
        for level in 1..=deep {
            assert_eq!(pattern.non_diagonality_brute(level), fast, "{name} level {level}");
        }
    }
}

#[test]
fn slab_removal_never_disconnects_valid_patterns() {
    for (name, pattern) in corpus() {
        let d = pattern.dim();
        let max_m = if d == 2 { 4 } else { 3 };
        let all_faces: Vec<(u32, u8)> =
            (0..d).flat_map(|axis| [(axis, 0u8), (axis, 1u8)]).collect();
        for m in 1..=max_m {
            for j in 1..=m {
                // single face, opposite pair, and the full set
                let cases: Vec<Vec<(u32, u8)>> = vec![
                    vec![(0, 0)],
                    vec![(0, 0), (0, 1)],
                    all_faces.clone(),
                ];
                for faces in cases {
                    let result = pattern.connectivity_check(m, j, &faces).unwrap();
                    assert_eq!(result, Connectivity::Connected, "{name} m={m} j={j} {faces:?}");
                }
            }
        }
    }
}

#[test]
fn lattice_edges_match_brute_force_pair_scan() {
    use gsc_core::LatticeDomain;
    for (name, pattern, m, mp) in [
        ("standard_carpet", GscPattern::standard_carpet(), 2u32, 2u32),
        ("sponge", GscPattern::sponge(), 1, 1),
        ("frame_5", common::frame_pattern(), 1, 1),
    ] {
        let dom = LatticeDomain::build(&pattern, m, mp, 0).unwrap();
        let cells = brute_cells(&pattern, mp);
        let mut expect = 0usize;
        for a in 0..cells.len() {
            for b in (a + 1)..cells.len() {
                let diffs: Vec<i64> = cells[a]
                    .iter()
                    .zip(cells[b].iter())
                    .map(|(&x, &y)| (x as i64 - y as i64).abs())
                    .collect();
                if diffs.iter().sum::<i64>() == 1 {
                    expect += 1;
                }
            }
        }
        assert_eq!(dom.edge_count(), expect, "{name}");
    }
}

#[test]
fn keep_all_and_carpet_dimension_values() {
    let sc = GscPattern::standard_carpet();
    let dims = sc.dims().unwrap();
    assert!((dims.fractal_dim - 1.892789260714372).abs() < 1e-12);
    assert_eq!(dims.interface_cells, 3);

    let sponge = GscPattern::sponge().dims().unwrap();
    assert!((sponge.fractal_dim - (20f64.ln() / 3f64.ln())).abs() < 1e-12);
    assert!((sponge.interface_dim - (8f64.ln() / 3f64.ln())).abs() < 1e-12);
}
