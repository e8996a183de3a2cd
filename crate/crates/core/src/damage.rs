//! Heralded bond failures and their consequences for the check lattices.
//!
//! A failed bond removes qubits from error correction. Cubes that share a
//! removed face are multiplied into superchecks, and the correlation surface
//! is rebuilt as the cut around the damage cluster attached to the low
//! terminal. When that cluster reaches the high terminal no surface exists and
//! the trial is a percolation failure.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::lattice::{BondId, CheckLattice, LatticeGeometry, LatticeKind, NodeId, SiteId, Terminal, OPEN};
use crate::rng::{stream, Stage};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub p_bond: f64,
    pub p_comp: f64,
    pub seed: u64,
    pub trial_index: u64,
}

impl NoiseParams {
    pub fn new(p_bond: f64, p_comp: f64, seed: u64) -> Result<Self> {
        let params = Self {
            p_bond,
            p_comp,
            seed,
            trial_index: 0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_bond", self.p_bond)?;
        check_probability("p_comp", self.p_comp)
    }

    pub fn with_trial(mut self, trial_index: u64) -> Self {
        self.trial_index = trial_index;
        self
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange { name, value })
    }
}

/// How a failed bond is mapped onto removed qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Both endpoints are treated as lost; classical processing only.
    NonAdaptive,
    /// One endpoint, chosen by a fair coin, is measured in Z.
    Adaptive,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::NonAdaptive => "non-adaptive",
            Scheme::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "non-adaptive" | "nonadaptive" => Ok(Scheme::NonAdaptive),
            "adaptive" => Ok(Scheme::Adaptive),
            other => Err(format!("unknown scheme `{other}` (expected non-adaptive or adaptive)")),
        }
    }
}

/// Samples the failed bonds of one trial, in canonical bond order.
pub fn sample_bond_failures(g: &LatticeGeometry, n: &NoiseParams) -> Vec<BondId> {
    let candidates = g.unprotected_bonds();
    if n.p_bond <= 0.0 {
        return Vec::new();
    }
    if n.p_bond >= 1.0 {
        return candidates.to_vec();
    }
    let mut rng = stream(n.seed, n.trial_index, Stage::BondFailures);
    candidates
        .iter()
        .copied()
        .filter(|_| rng.gen::<f64>() < n.p_bond)
        .collect()
}

/// Qubits excluded from their lattice's checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemovedSites {
    mask: Vec<bool>,
    primal: Vec<SiteId>,
    dual: Vec<SiteId>,
}

impl RemovedSites {
    pub fn none(g: &LatticeGeometry) -> Self {
        Self {
            mask: vec![false; g.sites().len()],
            primal: Vec::new(),
            dual: Vec::new(),
        }
    }

    /// Builds a removal set from explicit sites; used by tests and tools.
    pub fn from_sites(g: &LatticeGeometry, sites: impl IntoIterator<Item = SiteId>) -> Self {
        let mut removed = Self::none(g);
        for s in sites {
            removed.insert(g, s);
        }
        removed.primal.sort_unstable();
        removed.dual.sort_unstable();
        removed
    }

    fn insert(&mut self, g: &LatticeGeometry, site: SiteId) -> bool {
        if self.mask[site] {
            return false;
        }
        self.mask[site] = true;
        match g.site_kind(site) {
            LatticeKind::Primal => self.primal.push(site),
            LatticeKind::Dual => self.dual.push(site),
        }
        true
    }

    pub fn contains(&self, site: SiteId) -> bool {
        self.mask[site]
    }

    pub fn of(&self, kind: LatticeKind) -> &[SiteId] {
        match kind {
            LatticeKind::Primal => &self.primal,
            LatticeKind::Dual => &self.dual,
        }
    }

    pub fn total(&self) -> usize {
        self.primal.len() + self.dual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

/// Maps failed bonds onto removed qubits under the given scheme.
///
/// The adaptive scheme walks the failed bonds in canonical order and skips a
/// bond whose endpoint is already measured in Z.
pub fn map_failures(g: &LatticeGeometry, failed: &[BondId], scheme: Scheme, n: &NoiseParams) -> RemovedSites {
    let mut removed = RemovedSites::none(g);
    match scheme {
        Scheme::NonAdaptive => {
            for &b in failed {
                let bond = g.bond(b);
                removed.insert(g, bond.primal);
                removed.insert(g, bond.dual);
            }
        }
        Scheme::Adaptive => {
            let mut order = failed.to_vec();
            order.sort_unstable();
            order.dedup();
            let mut rng = stream(n.seed, n.trial_index, Stage::AdaptiveChoice);
            for b in order {
                let bond = g.bond(b);
                if removed.contains(bond.primal) || removed.contains(bond.dual) {
                    continue;
                }
                let site = if rng.gen::<bool>() { bond.primal } else { bond.dual };
                removed.insert(g, site);
            }
        }
    }
    removed.primal.sort_unstable();
    removed.dual.sort_unstable();
    removed
}

pub type GroupId = u32;

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra as usize].cmp(&self.rank[rb as usize]) {
            std::cmp::Ordering::Less => self.parent[ra as usize] = rb,
            std::cmp::Ordering::Greater => self.parent[rb as usize] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb as usize] = ra;
                self.rank[ra as usize] += 1;
            }
        }
    }
}

/// Partition of a lattice's nodes (cubes and terminals) into superchecks.
///
/// Group ids are canonical: groups are numbered by their smallest node id.
/// The groups holding a terminal are part of the boundary, not checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    kind: LatticeKind,
    group_of: Vec<GroupId>,
    sizes: Vec<u32>,
}

impl Partition {
    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn group(&self, node: NodeId) -> GroupId {
        self.group_of[node as usize]
    }

    /// Group of a face end, `None` for open ends.
    pub fn group_of_end(&self, node: NodeId) -> Option<GroupId> {
        (node != OPEN).then(|| self.group_of[node as usize])
    }

    pub fn size(&self, group: GroupId) -> usize {
        self.sizes[group as usize] as usize
    }

    pub fn terminal_group(&self, t: Terminal) -> GroupId {
        let n = self.group_of.len();
        match t {
            Terminal::Low => self.group_of[n - 2],
            Terminal::High => self.group_of[n - 1],
        }
    }

    pub fn is_boundary(&self, group: GroupId) -> bool {
        group == self.terminal_group(Terminal::Low) || group == self.terminal_group(Terminal::High)
    }

    /// True when no cubes were merged.
    pub fn is_trivial(&self) -> bool {
        self.sizes.len() == self.group_of.len()
    }

    pub fn members(&self, group: GroupId) -> Vec<NodeId> {
        (0..self.group_of.len() as NodeId).filter(|&n| self.group(n) == group).collect()
    }

    /// Face qubits of a supercheck: faces with exactly one side in the group.
    pub fn supercheck_faces(&self, lattice: &CheckLattice, group: GroupId) -> Vec<SiteId> {
        (0..lattice.face_count())
            .filter(|&f| {
                let [a, b] = lattice.face_nodes(f);
                (self.group_of_end(a) == Some(group)) != (self.group_of_end(b) == Some(group))
            })
            .map(|f| lattice.faces()[f])
            .collect()
    }
}

/// Merges cubes across removed faces into superchecks.
pub fn form_superchecks(g: &LatticeGeometry, removed: &RemovedSites, kind: LatticeKind) -> Partition {
    let lattice = g.lattice(kind);
    let nodes = lattice.node_count();
    let mut uf = UnionFind::new(nodes);
    for &site in removed.of(kind) {
        let f = lattice.local_face(site).expect("removed site belongs to this lattice");
        let [a, b] = lattice.face_nodes(f);
        debug_assert!(a != OPEN && b != OPEN, "closed-boundary faces are never removed");
        if a != OPEN && b != OPEN {
            uf.union(a, b);
        }
    }
    let mut label = vec![u32::MAX; nodes];
    let mut group_of = Vec::with_capacity(nodes);
    let mut sizes: Vec<u32> = Vec::new();
    for n in 0..nodes as u32 {
        let root = uf.find(n) as usize;
        if label[root] == u32::MAX {
            label[root] = sizes.len() as u32;
            sizes.push(0);
        }
        let gid = label[root];
        sizes[gid as usize] += 1;
        group_of.push(gid);
    }
    Partition { kind, group_of, sizes }
}

/// Removed qubits connect the two terminals of a lattice; no logical readout exists.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("percolation on the {kind} lattice: removed qubits span its terminals")]
pub struct PercolationError {
    pub kind: LatticeKind,
}

/// Set of intact faces whose combined parity carries the logical outcome.
///
/// The surface is the cut around a set of nodes; a chain of faces between two
/// nodes crosses it an odd number of times iff exactly one end is inside.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrelationSurface {
    kind: LatticeKind,
    mask: Vec<bool>,
    inside: Vec<bool>,
}

impl CorrelationSurface {
    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    /// Whether a local face lies on the surface.
    pub fn contains_face(&self, face: usize) -> bool {
        self.mask[face]
    }

    pub fn contains(&self, lattice: &CheckLattice, site: SiteId) -> bool {
        lattice.local_face(site).is_some_and(|f| self.mask[f])
    }

    pub fn faces(&self, lattice: &CheckLattice) -> Vec<SiteId> {
        (0..self.mask.len()).filter(|&f| self.mask[f]).map(|f| lattice.faces()[f]).collect()
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parity of the number of listed local faces that lie on the surface.
    pub fn crossing_parity(&self, faces: impl IntoIterator<Item = usize>) -> bool {
        faces.into_iter().fold(false, |acc, f| acc ^ self.mask[f])
    }

    /// Whether a node lies inside the cut; open ends are outside.
    pub fn inside(&self, node: NodeId) -> bool {
        node != OPEN && self.inside[node as usize]
    }

    /// Multiplies the surface by a supercheck, toggling all of its faces.
    pub fn deformed_by(&self, lattice: &CheckLattice, partition: &Partition, group: GroupId) -> Self {
        let mut mask = self.mask.clone();
        for (f, m) in mask.iter_mut().enumerate() {
            let [a, b] = lattice.face_nodes(f);
            if (partition.group_of_end(a) == Some(group)) != (partition.group_of_end(b) == Some(group)) {
                *m = !*m;
            }
        }
        let mut inside = self.inside.clone();
        for (n, i) in inside.iter_mut().enumerate() {
            if partition.group(n as NodeId) == group {
                *i = !*i;
            }
        }
        Self { kind: self.kind, mask, inside }
    }
}

/// Cuts the lattice around the damage cluster of the low terminal.
pub fn build_correlation_surface(
    g: &LatticeGeometry,
    partition: &Partition,
    removed: &RemovedSites,
    kind: LatticeKind,
) -> std::result::Result<CorrelationSurface, PercolationError> {
    let lattice = g.lattice(kind);
    let inside = partition.terminal_group(Terminal::Low);
    if partition.terminal_group(Terminal::High) == inside {
        return Err(PercolationError { kind });
    }
    let mask: Vec<bool> = (0..lattice.face_count())
        .map(|f| {
            let [a, b] = lattice.face_nodes(f);
            (partition.group_of_end(a) == Some(inside)) != (partition.group_of_end(b) == Some(inside))
        })
        .collect();
    debug_assert!(lattice
        .faces()
        .iter()
        .zip(&mask)
        .all(|(&s, &m)| !(m && removed.contains(s))));
    let inside = (0..lattice.node_count() as NodeId).map(|n| partition.group(n) == inside).collect();
    Ok(CorrelationSurface { kind, mask, inside })
}

/// Partition and surface of one lattice after damage.
#[derive(Clone, Debug)]
pub struct LatticeDamage {
    pub partition: Partition,
    pub surface: std::result::Result<CorrelationSurface, PercolationError>,
}

impl LatticeDamage {
    pub fn percolated(&self) -> bool {
        self.surface.is_err()
    }
}

/// Everything the decoder needs to know about the bond failures of one trial.
#[derive(Clone, Debug)]
pub struct DamageReport {
    pub failed_bonds: Vec<BondId>,
    pub removed: RemovedSites,
    pub primal: LatticeDamage,
    pub dual: LatticeDamage,
}

impl DamageReport {
    pub fn lattice(&self, kind: LatticeKind) -> &LatticeDamage {
        match kind {
            LatticeKind::Primal => &self.primal,
            LatticeKind::Dual => &self.dual,
        }
    }

    pub fn removed_primal(&self) -> &[SiteId] {
        self.removed.of(LatticeKind::Primal)
    }

    pub fn removed_dual(&self) -> &[SiteId] {
        self.removed.of(LatticeKind::Dual)
    }

    pub fn percolation_primal(&self) -> bool {
        self.primal.percolated()
    }

    pub fn percolation_dual(&self) -> bool {
        self.dual.percolated()
    }

    pub fn percolated(&self) -> bool {
        self.percolation_primal() || self.percolation_dual()
    }
}

/// Damage of a given removal pattern on one lattice.
pub fn lattice_damage(g: &LatticeGeometry, removed: &RemovedSites, kind: LatticeKind) -> LatticeDamage {
    let partition = form_superchecks(g, removed, kind);
    let surface = build_correlation_surface(g, &partition, removed, kind);
    LatticeDamage { partition, surface }
}

/// Samples and processes the bond failures of one trial.
pub fn assess_damage(g: &LatticeGeometry, scheme: Scheme, n: &NoiseParams) -> DamageReport {
    let failed_bonds = sample_bond_failures(g, n);
    let removed = map_failures(g, &failed_bonds, scheme, n);
    DamageReport {
        primal: lattice_damage(g, &removed, LatticeKind::Primal),
        dual: lattice_damage(g, &removed, LatticeKind::Dual),
        failed_bonds,
        removed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, Site};
    use proptest::prelude::*;

    fn params(p_bond: f64) -> NoiseParams {
        NoiseParams::new(p_bond, 0.0, 11).unwrap()
    }

    fn bulk_bond(g: &LatticeGeometry) -> BondId {
        (0..g.bonds().len())
            .find(|&b| {
                let bond = g.bond(b);
                g.is_bulk(bond.primal) && g.is_bulk(bond.dual) && g.site(bond.primal).z.min(g.site(bond.dual).z) >= 3
            })
            .unwrap()
    }

    #[test]
    fn probabilities_are_validated() {
        assert!(NoiseParams::new(1.5, 0.0, 0).is_err());
        assert!(NoiseParams::new(0.1, -0.1, 0).is_err());
        assert!(NoiseParams::new(1.0, 0.0, 0).is_ok());
    }

    #[test]
    fn scheme_round_trips_through_strings() {
        for s in [Scheme::NonAdaptive, Scheme::Adaptive] {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert!("both".parse::<Scheme>().is_err());
    }

    #[test]
    fn extreme_failure_rates() {
        let g = build_lattice(3).unwrap();
        assert!(sample_bond_failures(&g, &params(0.0)).is_empty());
        let all = sample_bond_failures(&g, &params(1.0));
        assert_eq!(all, g.unprotected_bonds());
        assert!(all.iter().all(|&b| !g.is_protected_bond(b)));
    }

    #[test]
    fn failure_fraction_is_binomial() {
        let g = build_lattice(6).unwrap();
        let mut n = params(0.1);
        let mut total = 0usize;
        let mut failed = 0usize;
        let mut trial = 0;
        while total < 100_000 {
            n.trial_index = trial;
            failed += sample_bond_failures(&g, &n).len();
            total += g.unprotected_bonds().len();
            trial += 1;
        }
        let p = 0.1;
        let mean = failed as f64 / total as f64;
        let sigma = (p * (1.0 - p) / total as f64).sqrt();
        assert!((mean - p).abs() < 5.0 * sigma, "mean {mean}");
    }

    #[test]
    fn non_adaptive_removes_both_endpoints() {
        let g = build_lattice(3).unwrap();
        let b = bulk_bond(&g);
        let removed = map_failures(&g, &[b], Scheme::NonAdaptive, &params(0.0));
        assert_eq!(removed.of(LatticeKind::Primal), &[g.bond(b).primal]);
        assert_eq!(removed.of(LatticeKind::Dual), &[g.bond(b).dual]);
    }

    #[test]
    fn adaptive_removes_one_endpoint() {
        let g = build_lattice(3).unwrap();
        let b = bulk_bond(&g);
        let mut saw = [false; 2];
        for t in 0..64 {
            let removed = map_failures(&g, &[b], Scheme::Adaptive, &params(0.0).with_trial(t));
            assert_eq!(removed.total(), 1);
            saw[removed.of(LatticeKind::Primal).len()] = true;
        }
        assert_eq!(saw, [true, true], "coin should pick both lattices over 64 trials");
    }

    #[test]
    fn adaptive_skips_bond_with_removed_endpoint() {
        // Two bonds sharing a primal qubit. Whichever endpoint the first bond
        // removes, the second bond acts only if that endpoint is not shared.
        let g = build_lattice(3).unwrap();
        let first = bulk_bond(&g);
        let shared = g.bond(first).primal;
        let second = *g.incident_bonds(shared).iter().find(|&&b| b != first && !g.is_protected_bond(b)).unwrap();
        let (lo, hi) = (first.min(second), first.max(second));
        for t in 0..32 {
            let n = params(0.0).with_trial(t);
            let removed = map_failures(&g, &[hi, lo], Scheme::Adaptive, &n);
            let first_only = map_failures(&g, &[lo], Scheme::Adaptive, &n);
            if first_only.contains(shared) {
                assert_eq!(removed, first_only, "trial {t}");
            } else {
                assert_eq!(removed.total(), 2, "trial {t}");
            }
        }
    }

    #[test]
    fn adaptive_never_removes_more_than_non_adaptive() {
        let g = build_lattice(4).unwrap();
        for t in 0..20 {
            let n = params(0.08).with_trial(t);
            let failed = sample_bond_failures(&g, &n);
            let a = map_failures(&g, &failed, Scheme::Adaptive, &n);
            let na = map_failures(&g, &failed, Scheme::NonAdaptive, &n);
            assert!(a.total() <= na.total());
            // Every failed bond is covered by at least one removed endpoint.
            for &b in &failed {
                let bond = g.bond(b);
                assert!(a.contains(bond.primal) || a.contains(bond.dual));
            }
        }
    }

    fn shared_face(g: &LatticeGeometry, kind: LatticeKind, a: Site, b: Site) -> SiteId {
        let mid = Site::new((a.x + b.x) / 2, (a.y + b.y) / 2, (a.z + b.z) / 2);
        let id = g.site_id(&mid).unwrap();
        assert_eq!(g.site_kind(id), kind);
        id
    }

    #[test]
    fn intact_lattice_has_singleton_superchecks() {
        let g = build_lattice(3).unwrap();
        let p = form_superchecks(&g, &RemovedSites::none(&g), LatticeKind::Primal);
        assert!(p.is_trivial());
        let lat = g.lattice(LatticeKind::Primal);
        for (c, cube) in lat.cubes().iter().enumerate() {
            let mut faces = p.supercheck_faces(lat, p.group(c as NodeId));
            faces.sort_unstable();
            let mut own = cube.faces.clone();
            own.sort_unstable();
            assert_eq!(faces, own);
        }
    }

    #[test]
    fn two_merged_cubes_have_ten_faces() {
        let g = build_lattice(3).unwrap();
        let (a, b) = (Site::new(3, 1, 5), Site::new(3, 3, 5));
        let face = shared_face(&g, LatticeKind::Primal, a, b);
        let removed = RemovedSites::from_sites(&g, [face]);
        let p = form_superchecks(&g, &removed, LatticeKind::Primal);
        let lat = g.lattice(LatticeKind::Primal);
        let ca = lat.cubes().iter().position(|c| c.center == a).unwrap() as NodeId;
        let cb = lat.cubes().iter().position(|c| c.center == b).unwrap() as NodeId;
        assert_eq!(p.group(ca), p.group(cb));
        assert_eq!(p.group_count(), lat.node_count() - 1);
        let faces = p.supercheck_faces(lat, p.group(ca));
        assert_eq!(faces.len(), 10);
        assert!(!faces.contains(&face));
    }

    #[test]
    fn three_collinear_cubes_have_fourteen_faces() {
        let g = build_lattice(3).unwrap();
        let centers = [Site::new(3, 3, 3), Site::new(3, 3, 5), Site::new(3, 3, 7)];
        let f1 = shared_face(&g, LatticeKind::Primal, centers[0], centers[1]);
        let f2 = shared_face(&g, LatticeKind::Primal, centers[1], centers[2]);
        let removed = RemovedSites::from_sites(&g, [f1, f2]);
        let p = form_superchecks(&g, &removed, LatticeKind::Primal);
        let lat = g.lattice(LatticeKind::Primal);
        let c0 = lat.cubes().iter().position(|c| c.center == centers[0]).unwrap() as NodeId;
        let faces = p.supercheck_faces(lat, p.group(c0));
        // Explicit enumeration: all member faces minus the two shared ones.
        let mut expected: Vec<SiteId> = centers
            .iter()
            .flat_map(|c| lat.cubes().iter().find(|q| q.center == *c).unwrap().faces.clone())
            .filter(|f| *f != f1 && *f != f2)
            .collect();
        expected.sort_unstable();
        let mut got = faces.clone();
        got.sort_unstable();
        assert_eq!(got, expected);
        assert_eq!(faces.len(), 14);
    }

    #[test]
    fn flat_sheet_without_damage() {
        let g = build_lattice(2).unwrap();
        let removed = RemovedSites::none(&g);
        for kind in LatticeKind::BOTH {
            let p = form_superchecks(&g, &removed, kind);
            let s = build_correlation_surface(&g, &p, &removed, kind).unwrap();
            let lat = g.lattice(kind);
            let low = lat.terminal(Terminal::Low);
            for f in 0..lat.face_count() {
                assert_eq!(s.contains_face(f), lat.face_nodes(f).contains(&low));
            }
        }
    }

    #[test]
    fn removed_sheet_face_deforms_by_one_cube() {
        let g = build_lattice(2).unwrap();
        let lat = g.lattice(LatticeKind::Primal);
        let low = lat.terminal(Terminal::Low);
        let sheet_face = (0..lat.face_count())
            .find(|&f| lat.face_nodes(f).contains(&low) && !lat.is_perfect(f))
            .unwrap();
        let site = lat.faces()[sheet_face];
        let flat = {
            let none = RemovedSites::none(&g);
            let p = form_superchecks(&g, &none, LatticeKind::Primal);
            build_correlation_surface(&g, &p, &none, LatticeKind::Primal).unwrap()
        };
        let removed = RemovedSites::from_sites(&g, [site]);
        let p = form_superchecks(&g, &removed, LatticeKind::Primal);
        let s = build_correlation_surface(&g, &p, &removed, LatticeKind::Primal).unwrap();
        assert!(!s.contains(lat, site));
        let cube = lat.face_nodes(sheet_face).into_iter().find(|&n| n != low).unwrap();
        let mut diff: Vec<SiteId> = (0..lat.face_count())
            .filter(|&f| s.contains_face(f) != flat.contains_face(f))
            .map(|f| lat.faces()[f])
            .collect();
        diff.sort_unstable();
        let mut cube_faces = lat.cubes()[cube as usize].faces.clone();
        cube_faces.sort_unstable();
        assert_eq!(diff, cube_faces);
    }

    #[test]
    fn spanning_removed_chain_percolates() {
        let g = build_lattice(3).unwrap();
        let lat = g.lattice(LatticeKind::Primal);
        // Straight line of y-normal faces at x = 3, z = 5 from y = 0 to y = 4.
        let chain: Vec<SiteId> = (0..=2).map(|k| g.site_id(&Site::new(3, 2 * k, 5)).unwrap()).collect();
        let removed = RemovedSites::from_sites(&g, chain.clone());
        let p = form_superchecks(&g, &removed, LatticeKind::Primal);
        assert_eq!(
            build_correlation_surface(&g, &p, &removed, LatticeKind::Primal),
            Err(PercolationError { kind: LatticeKind::Primal })
        );
        // Dropping one link of the chain restores a surface.
        let partial = RemovedSites::from_sites(&g, chain[..2].iter().copied());
        let p = form_superchecks(&g, &partial, LatticeKind::Primal);
        let s = build_correlation_surface(&g, &p, &partial, LatticeKind::Primal).unwrap();
        assert!(chain[..2].iter().all(|&c| !s.contains(lat, c)));
    }

    #[test]
    fn full_failure_percolates_non_adaptive() {
        let g = build_lattice(3).unwrap();
        let report = assess_damage(&g, Scheme::NonAdaptive, &params(1.0));
        assert!(report.percolation_primal() && report.percolation_dual());
    }

    /// Face membership must equal "exactly one end inside", removed faces
    /// must stay off the surface and the terminals must sit on opposite sides.
    fn assert_valid_cut(lat: &CheckLattice, removed: &RemovedSites, s: &CorrelationSurface) -> std::result::Result<(), TestCaseError> {
        prop_assert!(s.inside(lat.terminal(Terminal::Low)));
        prop_assert!(!s.inside(lat.terminal(Terminal::High)));
        for f in 0..lat.face_count() {
            let [a, b] = lat.face_nodes(f);
            prop_assert_eq!(s.contains_face(f), s.inside(a) != s.inside(b), "face {}", f);
            if removed.contains(lat.faces()[f]) {
                prop_assert!(!s.contains_face(f));
            }
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn surfaces_are_cuts(seed in any::<u64>(), d in 2usize..=4, p_bond in 0.0f64..0.06, adaptive in any::<bool>()) {
            let g = build_lattice(d).unwrap();
            let scheme = if adaptive { Scheme::Adaptive } else { Scheme::NonAdaptive };
            let report = assess_damage(&g, scheme, &NoiseParams::new(p_bond, 0.0, seed).unwrap());
            for kind in LatticeKind::BOTH {
                let lat = g.lattice(kind);
                let ld = report.lattice(kind);
                let Ok(surface) = &ld.surface else { continue };
                assert_valid_cut(lat, &report.removed, surface)?;
                for gid in 0..ld.partition.group_count() as GroupId {
                    if !ld.partition.is_boundary(gid) && gid % 3 == seed as GroupId % 3 {
                        assert_valid_cut(lat, &report.removed, &surface.deformed_by(lat, &ld.partition, gid))?;
                    }
                }
            }
        }
    }
}
