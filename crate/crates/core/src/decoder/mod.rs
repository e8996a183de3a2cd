//! Measurement errors, supercheck syndromes and matching-based decoding of one lattice.
//!
//! The dense backend builds the supercheck graph explicitly, runs Dijkstra
//! from every flagged supercheck and matches the resulting distance table with
//! [`crate::matching::mwpm`]. The sparse backend hands the cube-level graph to
//! a fusion blossom solver, with removed faces at zero weight so that merged
//! cubes act as one supercheck.

mod sparse;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::damage::{CorrelationSurface, GroupId, NoiseParams, Partition, RemovedSites};
use crate::lattice::{CheckLattice, LatticeGeometry, LatticeKind, SiteId, Terminal};
use crate::matching::{mwpm, DistanceTable, Mate, Matching};
use crate::num::Real;
use crate::rng::{stream, Stage};

pub use sparse::SPARSE_UNIT;

/// Floor applied to the measurement error rate when computing weights.
pub const P_FLOOR: f64 = 1e-9;

/// Largest code distance for which [`Backend::Auto`] uses the dense backend.
pub const AUTO_DENSE_MAX_DISTANCE: usize = 3;

/// Face qubits of one lattice whose X outcome is wrong, as sorted local face indices.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MeasurementErrors {
    faces: Vec<usize>,
}

impl MeasurementErrors {
    pub fn none() -> Self {
        Self::default()
    }

    /// Panics if a site is not a face of `lattice`.
    pub fn from_sites(lattice: &CheckLattice, sites: impl IntoIterator<Item = SiteId>) -> Self {
        Self::from_faces(sites.into_iter().map(|s| lattice.local_face(s).expect("site on this lattice")))
    }

    /// Repeated faces cancel.
    pub fn from_faces(faces: impl IntoIterator<Item = usize>) -> Self {
        Self { faces: xor_normalize(faces.into_iter().collect()) }
    }

    pub fn faces(&self) -> &[usize] {
        &self.faces
    }

    pub fn sites(&self, lattice: &CheckLattice) -> Vec<SiteId> {
        self.faces.iter().map(|&f| lattice.faces()[f]).collect()
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }
}

fn xor_normalize(mut faces: Vec<usize>) -> Vec<usize> {
    faces.sort_unstable();
    let mut out = Vec::with_capacity(faces.len());
    for f in faces {
        if out.last() == Some(&f) {
            out.pop();
        } else {
            out.push(f);
        }
    }
    out
}

/// Whether a face can carry a measurement error: intact and not perfectly measured.
pub fn is_eligible(lattice: &CheckLattice, removed: &RemovedSites, face: usize) -> bool {
    !lattice.is_perfect(face) && !removed.contains(lattice.faces()[face])
}

/// Flips every eligible face of the lattice independently with probability `p_comp`.
///
/// One uniform draw is made per face in canonical order whether or not the
/// face is eligible, so the same trial sees the same draws under any damage.
pub fn sample_measurement_errors(
    g: &LatticeGeometry,
    removed: &RemovedSites,
    kind: LatticeKind,
    n: &NoiseParams,
) -> MeasurementErrors {
    let lattice = g.lattice(kind);
    if n.p_comp <= 0.0 {
        return MeasurementErrors::none();
    }
    let stage = match kind {
        LatticeKind::Primal => Stage::PrimalFlips,
        LatticeKind::Dual => Stage::DualFlips,
    };
    let mut rng = stream(n.seed, n.trial_index, stage);
    let faces = (0..lattice.face_count())
        .filter(|&f| {
            let hit = rng.gen::<f64>() < n.p_comp;
            hit && is_eligible(lattice, removed, f)
        })
        .collect();
    MeasurementErrors { faces }
}

/// Superchecks with odd parity, in group order. Boundary groups are never flagged.
pub fn extract_syndrome(lattice: &CheckLattice, partition: &Partition, flipped: &MeasurementErrors) -> Vec<GroupId> {
    let mut parity = vec![false; partition.group_count()];
    for &f in flipped.faces() {
        for node in lattice.face_nodes(f) {
            if let Some(gid) = partition.group_of_end(node) {
                parity[gid as usize] ^= true;
            }
        }
    }
    (0..partition.group_count() as GroupId)
        .filter(|&gid| parity[gid as usize] && !partition.is_boundary(gid))
        .collect()
}

/// Flip probability of a superedge made of `k` faces each flipped with probability `p`.
pub fn superedge_flip_probability<T: Real>(p: T, k: u32) -> T {
    let two = T::of(2.0);
    (T::one() - (T::one() - two * p).powi(k as i32)) / two
}

/// Matching weight `ln((1 - q) / q)` of a superedge, with `p` clamped to `[P_FLOOR, 1/2]`.
pub fn superedge_weight<T: Real>(p: T, k: u32) -> T {
    let p = p.max(T::of(P_FLOOR)).min(T::of(0.5));
    let q = superedge_flip_probability(p, k);
    if q <= T::zero() {
        return T::infinity();
    }
    ((T::one() - q) / q).ln().max(T::zero())
}

/// Intact faces joining two different superchecks, aggregated.
#[derive(Clone, Debug, PartialEq)]
pub struct Superedge<T> {
    pub a: GroupId,
    pub b: GroupId,
    pub k: u32,
    pub q: T,
    pub weight: T,
    /// Local face indices, ascending.
    pub faces: Vec<usize>,
}

/// Supercheck graph of one damaged lattice. The two terminal groups are the
/// boundary nodes; edges between them are left out since no check sees them.
#[derive(Clone, Debug)]
pub struct SyndromeGraph<T> {
    kind: LatticeKind,
    node_count: usize,
    boundary: [GroupId; 2],
    edges: Vec<Superedge<T>>,
    adjacency: Vec<Vec<(GroupId, u32)>>,
}

impl<T: Real> SyndromeGraph<T> {
    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Superedge<T>] {
        &self.edges
    }

    pub fn boundary_node(&self, t: Terminal) -> GroupId {
        match t {
            Terminal::Low => self.boundary[0],
            Terminal::High => self.boundary[1],
        }
    }

    pub fn is_boundary(&self, node: GroupId) -> bool {
        self.boundary.contains(&node)
    }

    /// Neighbours of a node with the index of the connecting superedge.
    pub fn neighbors(&self, node: GroupId) -> &[(GroupId, u32)] {
        &self.adjacency[node as usize]
    }

    pub fn edge_between(&self, a: GroupId, b: GroupId) -> Option<&Superedge<T>> {
        self.adjacency[a as usize]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, e)| &self.edges[e as usize])
    }
}

/// Builds the weighted supercheck graph; perfectly measured faces never flip
/// and are left out.
pub fn build_matching_graph<T: Real>(
    g: &LatticeGeometry,
    partition: &Partition,
    removed: &RemovedSites,
    p_comp: T,
) -> SyndromeGraph<T> {
    let kind = partition.kind();
    let lattice = g.lattice(kind);
    let low = partition.terminal_group(Terminal::Low);
    let high = partition.terminal_group(Terminal::High);
    let mut keyed: Vec<(GroupId, GroupId, usize)> = Vec::new();
    for f in 0..lattice.face_count() {
        if !is_eligible(lattice, removed, f) {
            continue;
        }
        let [a, b] = lattice.face_nodes(f);
        let (Some(ga), Some(gb)) = (partition.group_of_end(a), partition.group_of_end(b)) else {
            continue;
        };
        if ga == gb || (partition.is_boundary(ga) && partition.is_boundary(gb)) {
            continue;
        }
        keyed.push((ga.min(gb), ga.max(gb), f));
    }
    keyed.sort_unstable();

    let node_count = partition.group_count();
    let mut edges: Vec<Superedge<T>> = Vec::new();
    let mut adjacency = vec![Vec::new(); node_count];
    for chunk in keyed.chunk_by(|x, y| (x.0, x.1) == (y.0, y.1)) {
        let (a, b, _) = chunk[0];
        let k = chunk.len() as u32;
        let p = p_comp.max(T::of(P_FLOOR)).min(T::of(0.5));
        let id = edges.len() as u32;
        adjacency[a as usize].push((b, id));
        adjacency[b as usize].push((a, id));
        edges.push(Superedge {
            a,
            b,
            k,
            q: superedge_flip_probability(p, k),
            weight: superedge_weight(p, k),
            faces: chunk.iter().map(|c| c.2).collect(),
        });
    }
    SyndromeGraph { kind, node_count, boundary: [low, high], edges, adjacency }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct HeapEntry<T> {
    dist: T,
    node: GroupId,
}

impl<T: Real> Eq for HeapEntry<T> {}

impl<T: Real> Ord for HeapEntry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl<T: Real> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path tree from a set of sources.
struct PathTree<T> {
    dist: Vec<T>,
    /// Superedge used to reach each node, `u32::MAX` for sources and unreached nodes.
    via: Vec<u32>,
    /// Source each node was reached from.
    origin: Vec<GroupId>,
}

impl<T: Real> PathTree<T> {
    /// Superedges from `node` back to its source.
    fn path_edges(&self, graph: &SyndromeGraph<T>, mut node: GroupId) -> Vec<u32> {
        let mut out = Vec::new();
        while self.via[node as usize] != u32::MAX {
            let e = self.via[node as usize];
            out.push(e);
            let edge = &graph.edges[e as usize];
            node = if edge.a == node { edge.b } else { edge.a };
        }
        out
    }
}

/// Dijkstra over the supercheck graph. Boundary nodes that are not sources
/// are reached but never expanded; ties go to the smaller node id.
fn shortest_paths<T: Real>(graph: &SyndromeGraph<T>, sources: &[GroupId], cutoff: T, target: Option<GroupId>) -> PathTree<T> {
    let n = graph.node_count;
    let mut tree = PathTree { dist: vec![T::infinity(); n], via: vec![u32::MAX; n], origin: vec![u32::MAX; n] };
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        tree.dist[s as usize] = T::zero();
        tree.origin[s as usize] = s;
        heap.push(HeapEntry { dist: T::zero(), node: s });
    }
    while let Some(HeapEntry { dist, node }) = heap.pop() {
        if done[node as usize] {
            continue;
        }
        done[node as usize] = true;
        if Some(node) == target || dist > cutoff {
            break;
        }
        if graph.is_boundary(node) && !sources.contains(&node) {
            continue;
        }
        for &(next, e) in graph.neighbors(node) {
            let nd = dist + graph.edges[e as usize].weight;
            if nd < tree.dist[next as usize] {
                tree.dist[next as usize] = nd;
                tree.via[next as usize] = e;
                tree.origin[next as usize] = tree.origin[node as usize];
                heap.push(HeapEntry { dist: nd, node: next });
            }
        }
    }
    tree
}

/// Which matching implementation [`decode_lattice_with`] uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Backend {
    /// Dijkstra distance table plus the in-crate blossom matcher.
    Dense,
    /// Fusion blossom on the cube-level graph.
    Sparse,
    /// Dense on small lattices, sparse otherwise.
    #[default]
    Auto,
}

/// Result of decoding one lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub success: bool,
    /// Correction chain as sorted local face indices.
    pub correction: Vec<usize>,
    pub flagged: usize,
}

fn pick_dense(backend: Backend, g: &LatticeGeometry) -> bool {
    match backend {
        Backend::Dense => true,
        Backend::Sparse => false,
        Backend::Auto => g.distance() <= AUTO_DENSE_MAX_DISTANCE,
    }
}

/// Decodes one lattice and reports whether the residual error leaves the
/// logical readout intact.
pub fn decode_lattice<T: Real>(
    g: &LatticeGeometry,
    partition: &Partition,
    removed: &RemovedSites,
    flipped: &MeasurementErrors,
    surface: &CorrelationSurface,
    p_comp: T,
) -> bool {
    lattice_verdict(g, partition, removed, flipped, surface, p_comp, Backend::Auto)
}

/// Success of decoding without building the correction chain: a matched path
/// crosses the surface an odd number of times iff its ends lie on opposite
/// sides of it.
pub fn lattice_verdict<T: Real>(
    g: &LatticeGeometry,
    partition: &Partition,
    removed: &RemovedSites,
    flipped: &MeasurementErrors,
    surface: &CorrelationSurface,
    p_comp: T,
    backend: Backend,
) -> bool {
    let lattice = g.lattice(partition.kind());
    let flagged = extract_syndrome(lattice, partition, flipped);
    let correction_parity = if flagged.is_empty() {
        false
    } else if pick_dense(backend, g) {
        let sol = dense_solve(g, partition, removed, &flagged, p_comp);
        let mut rep = vec![u32::MAX; partition.group_count()];
        for n in (0..lattice.node_count() as u32).rev() {
            rep[partition.group(n) as usize] = n;
        }
        let side = |gid: GroupId| surface.inside(rep[gid as usize]);
        sol.matching.mates.iter().enumerate().fold(false, |acc, (i, m)| match *m {
            Mate::Node(j) if i < j => acc ^ side(flagged[i]) ^ side(flagged[j]),
            Mate::Node(_) => acc,
            Mate::Boundary => acc ^ side(flagged[i]) ^ side(sol.boundary_tree.origin[flagged[i] as usize]),
        })
    } else {
        sparse::correction_parity(g, partition, removed, flipped, p_comp.as_f64(), surface)
    };
    surface.crossing_parity(flipped.faces().iter().copied()) == correction_parity
}

/// Decodes one lattice and returns the explicit correction chain.
pub fn decode_lattice_with<T: Real>(
    g: &LatticeGeometry,
    partition: &Partition,
    removed: &RemovedSites,
    flipped: &MeasurementErrors,
    surface: &CorrelationSurface,
    p_comp: T,
    backend: Backend,
) -> Decoded {
    let lattice = g.lattice(partition.kind());
    let flagged = extract_syndrome(lattice, partition, flipped);
    let correction = if flagged.is_empty() {
        Vec::new()
    } else if pick_dense(backend, g) {
        dense_correction(g, partition, removed, &flagged, p_comp)
    } else {
        sparse::correction(g, partition, removed, flipped, p_comp.as_f64())
    };
    let residual = surface.crossing_parity(flipped.faces().iter().copied())
        ^ surface.crossing_parity(correction.iter().copied());
    Decoded { success: !residual, correction, flagged: flagged.len() }
}

struct DenseSolution<T> {
    graph: SyndromeGraph<T>,
    matching: Matching<T>,
    boundary_tree: PathTree<T>,
}

fn dense_solve<T: Real>(
    g: &LatticeGeometry,
    partition: &Partition,
    removed: &RemovedSites,
    flagged: &[GroupId],
    p_comp: T,
) -> DenseSolution<T> {
    let graph = build_matching_graph(g, partition, removed, p_comp);
    let (table, boundary_tree) = distance_table(&graph, flagged);
    let matching = mwpm(&table).expect("boundary twins make every table matchable");
    DenseSolution { graph, matching, boundary_tree }
}

/// Correction chain of the dense backend: one face of every superedge on the
/// shortest path realizing each matched pair.
pub fn dense_correction<T: Real>(
    g: &LatticeGeometry,
    partition: &Partition,
    removed: &RemovedSites,
    flagged: &[GroupId],
    p_comp: T,
) -> Vec<usize> {
    let DenseSolution { graph, matching, boundary_tree } = dense_solve(g, partition, removed, flagged, p_comp);
    let mut faces = Vec::new();
    for (i, mate) in matching.mates.iter().enumerate() {
        let edges = match *mate {
            Mate::Node(j) if i < j => {
                let tree = shortest_paths(&graph, &[flagged[i]], T::infinity(), Some(flagged[j]));
                tree.path_edges(&graph, flagged[j])
            }
            Mate::Node(_) => continue,
            Mate::Boundary => boundary_tree.path_edges(&graph, flagged[i]),
        };
        faces.extend(edges.into_iter().map(|e| graph.edges[e as usize].faces[0]));
    }
    xor_normalize(faces)
}

/// Flagged-to-flagged and flagged-to-boundary distances. Pairs no cheaper
/// than sending both nodes to the boundary are dropped.
fn distance_table<T: Real>(graph: &SyndromeGraph<T>, flagged: &[GroupId]) -> (DistanceTable<T>, PathTree<T>) {
    let n = flagged.len();
    let boundary_tree = shortest_paths(graph, &graph.boundary, T::infinity(), None);
    let mut table = DistanceTable::with_boundary(n);
    let b: Vec<T> = flagged.iter().map(|&u| boundary_tree.dist[u as usize]).collect();
    let b_max = b.iter().copied().filter(|x| x.is_finite()).fold(T::zero(), T::max);
    for (i, &bi) in b.iter().enumerate() {
        if bi.is_finite() {
            table.set_boundary(i, Some(bi));
        }
    }
    for (i, &u) in flagged.iter().enumerate() {
        let cutoff = if b[i].is_finite() { b[i] + b_max } else { T::infinity() };
        let tree = shortest_paths(graph, &[u], cutoff, None);
        for (j, &v) in flagged.iter().enumerate().skip(i + 1) {
            let d = tree.dist[v as usize];
            if d.is_finite() && !(d >= b[i] + b[j]) {
                table.set_pair(i, j, Some(d));
            }
        }
    }
    (table, boundary_tree)
}

/// How a trial ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureClass {
    None,
    LogicalPrimal,
    LogicalDual,
    Percolation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub success: bool,
    pub failure_class: FailureClass,
}

impl TrialOutcome {
    pub fn from_class(failure_class: FailureClass) -> Self {
        Self { success: failure_class == FailureClass::None, failure_class }
    }
}

/// Distance table between flagged superchecks, with boundary distances.
pub fn flagged_distances<T: Real>(graph: &SyndromeGraph<T>, flagged: &[GroupId]) -> DistanceTable<T> {
    distance_table(graph, flagged).0
}
