//! Sparse backend: fusion blossom on the cube-level graph.
//!
//! Each thread keeps one solver per lattice shape. The graph has a vertex per
//! cube, the two terminals as virtual vertices and an edge per face. Per trial,
//! removed faces drop to zero weight, which fuses the cubes of a supercheck,
//! and faces of a multi-face superedge take that superedge's weight.

use std::cell::RefCell;
use std::collections::HashMap;

use fusion_blossom::mwpm_solver::{PrimalDualSolver, SolverSerial};
use fusion_blossom::util::{EdgeIndex, SolverInitializer, SyndromePattern, VertexIndex, Weight};

use super::{is_eligible, superedge_weight, xor_normalize, MeasurementErrors};
use crate::damage::{CorrelationSurface, GroupId, Partition, RemovedSites};
use crate::lattice::{Extents, LatticeGeometry, LatticeKind, NodeId, Terminal, OPEN};

/// Integer weight of a single intact face. Fusion blossom wants even weights.
pub const SPARSE_UNIT: Weight = 2000;

/// Weight of perfectly measured faces, large enough never to be worth crossing.
const PERFECT_WEIGHT: Weight = SPARSE_UNIT * 10_000;

struct CachedSolver {
    solver: SolverSerial,
    edge_of_face: Vec<Option<EdgeIndex>>,
    face_of_edge: Vec<usize>,
}

impl CachedSolver {
    fn new(g: &LatticeGeometry, kind: LatticeKind) -> Self {
        let lattice = g.lattice(kind);
        let low = lattice.terminal(Terminal::Low);
        let high = lattice.terminal(Terminal::High);
        let mut edges = Vec::new();
        let mut edge_of_face = vec![None; lattice.face_count()];
        let mut face_of_edge = Vec::new();
        for f in 0..lattice.face_count() {
            let [a, b] = lattice.face_nodes(f);
            if a == OPEN || b == OPEN || (a >= low && b >= low) {
                continue;
            }
            let w = if lattice.is_perfect(f) { PERFECT_WEIGHT } else { SPARSE_UNIT };
            edge_of_face[f] = Some(edges.len() as EdgeIndex);
            face_of_edge.push(f);
            edges.push((a as VertexIndex, b as VertexIndex, w));
        }
        let init = SolverInitializer::new(lattice.node_count() as VertexIndex, edges, vec![low as VertexIndex, high as VertexIndex]);
        Self { solver: SolverSerial::new(&init), edge_of_face, face_of_edge }
    }
}

thread_local! {
    static SOLVERS: RefCell<HashMap<(Extents, LatticeKind), CachedSolver>> = RefCell::new(HashMap::new());
}

fn units(ratio: f64) -> Weight {
    2 * ((ratio * SPARSE_UNIT as f64 / 2.0).round() as Weight)
}

/// Per-trial weight changes: zero for removed faces, aggregated weights for
/// faces of superedges that touch a merged supercheck.
fn dynamic_weights(
    g: &LatticeGeometry,
    partition: &Partition,
    removed: &RemovedSites,
    p_comp: f64,
    edge_of_face: &[Option<EdgeIndex>],
) -> Vec<(EdgeIndex, Weight)> {
    let kind = partition.kind();
    let lattice = g.lattice(kind);
    let mut out: Vec<(EdgeIndex, Weight)> = Vec::new();
    for &site in removed.of(kind) {
        let f = lattice.local_face(site).expect("removed site on this lattice");
        if let Some(e) = edge_of_face[f] {
            out.push((e, 0));
        }
    }
    if partition.is_trivial() {
        return out;
    }
    let mut keyed: Vec<(GroupId, GroupId, usize)> = Vec::new();
    for f in 0..lattice.face_count() {
        if edge_of_face[f].is_none() || !is_eligible(lattice, removed, f) {
            continue;
        }
        let [a, b] = lattice.face_nodes(f);
        let (ga, gb) = (partition.group(a), partition.group(b));
        if ga == gb || (partition.is_boundary(ga) && partition.is_boundary(gb)) {
            continue;
        }
        if partition.size(ga) > 1 || partition.size(gb) > 1 {
            keyed.push((ga.min(gb), ga.max(gb), f));
        }
    }
    keyed.sort_unstable();
    let w1: f64 = superedge_weight(p_comp, 1);
    for chunk in keyed.chunk_by(|x, y| (x.0, x.1) == (y.0, y.1)) {
        let k = chunk.len() as u32;
        if k < 2 {
            continue;
        }
        let ratio = if w1 > 1e-12 { superedge_weight(p_comp, k) / w1 } else { 1.0 };
        let w = units(ratio);
        for &(_, _, f) in chunk {
            out.push((edge_of_face[f].expect("graph face"), w));
        }
    }
    out
}

fn defects(g: &LatticeGeometry, kind: LatticeKind, flipped: &MeasurementErrors) -> Vec<VertexIndex> {
    let lattice = g.lattice(kind);
    let cubes = lattice.cube_count();
    let mut parity = vec![false; cubes];
    for &f in flipped.faces() {
        for node in lattice.face_nodes(f) {
            if (node as usize) < cubes {
                parity[node as usize] ^= true;
            }
        }
    }
    (0..cubes).filter(|&c| parity[c]).map(|c| c as VertexIndex).collect()
}

fn with_solution<R>(
    g: &LatticeGeometry,
    partition: &Partition,
    removed: &RemovedSites,
    defects: Vec<VertexIndex>,
    p_comp: f64,
    read: impl FnOnce(&mut CachedSolver) -> R,
) -> R {
    let kind = partition.kind();
    SOLVERS.with(|cell| {
        let mut cache = cell.borrow_mut();
        let cached = cache.entry((g.extents(), kind)).or_insert_with(|| CachedSolver::new(g, kind));
        let weights = dynamic_weights(g, partition, removed, p_comp, &cached.edge_of_face);
        cached.solver.solve(&SyndromePattern::new_dynamic_weights(defects, vec![], weights));
        let out = read(cached);
        cached.solver.clear();
        out
    })
}

/// Correction chain as sorted local faces.
pub(super) fn correction(
    g: &LatticeGeometry,
    partition: &Partition,
    removed: &RemovedSites,
    flipped: &MeasurementErrors,
    p_comp: f64,
) -> Vec<usize> {
    let lattice = g.lattice(partition.kind());
    let defects = defects(g, partition.kind(), flipped);
    if defects.is_empty() {
        return Vec::new();
    }
    let faces = with_solution(g, partition, removed, defects, p_comp, |cached| {
        cached
            .solver
            .subgraph()
            .into_iter()
            .map(|e| cached.face_of_edge[e])
            .filter(|&f| !removed.contains(lattice.faces()[f]))
            .collect()
    });
    xor_normalize(faces)
}

/// Crossing parity of the correction chain, read off the matched endpoints.
pub(super) fn correction_parity(
    g: &LatticeGeometry,
    partition: &Partition,
    removed: &RemovedSites,
    flipped: &MeasurementErrors,
    p_comp: f64,
    surface: &CorrelationSurface,
) -> bool {
    let defects = defects(g, partition.kind(), flipped);
    if defects.is_empty() {
        return false;
    }
    with_solution(g, partition, removed, defects, p_comp, |cached| {
        let m = cached.solver.perfect_matching();
        let side = |v: VertexIndex| surface.inside(v as NodeId);
        let pairs = m
            .peer_matchings
            .iter()
            .fold(false, |acc, (a, b)| acc ^ side(a.get_representative_vertex()) ^ side(b.get_representative_vertex()));
        m.virtual_matchings
            .iter()
            .fold(pairs, |acc, (a, v)| acc ^ side(a.get_representative_vertex()) ^ side(*v))
    })
}
