//! Geometry of the cubic topological cluster state.
//!
//! Qubits sit on integer points with exactly one or two odd coordinates.
//! Primal cubes have all-even corners, so their centers are all-odd and their
//! face qubits carry two odd coordinates. Dual cubes are centered on the
//! all-even points and own the face qubits with a single odd coordinate.
//!
//! The z axis is the simulated time direction with `4d - 1` layers. The primal
//! lattice terminates its error strings on the two y boundaries, the dual
//! lattice on the two x boundaries; every other boundary is closed.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type SiteId = usize;
pub type BondId = usize;
pub type CubeId = usize;

/// Compact node id inside a [`CheckLattice`]: cubes first, then the two terminals.
pub type NodeId = u32;

/// Marker for a face end that leads out of the lattice without reaching a terminal.
pub const OPEN: NodeId = NodeId::MAX;

const NO_SITE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl Site {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn odd_count(&self) -> u32 {
        [self.x, self.y, self.z].iter().filter(|c| c.rem_euclid(2) == 1).count() as u32
    }

    pub fn is_qubit(&self) -> bool {
        matches!(self.odd_count(), 1 | 2)
    }

    /// Lattice whose checks measure this qubit, or `None` for non-qubit points.
    pub fn kind(&self) -> Option<LatticeKind> {
        match self.odd_count() {
            2 => Some(LatticeKind::Primal),
            1 => Some(LatticeKind::Dual),
            _ => None,
        }
    }

    pub fn coord(&self, axis: Axis) -> i32 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn shifted(&self, axis: Axis, delta: i32) -> Site {
        let mut s = *self;
        match axis {
            Axis::X => s.x += delta,
            Axis::Y => s.y += delta,
            Axis::Z => s.z += delta,
        }
        s
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LatticeKind {
    Primal,
    Dual,
}

impl LatticeKind {
    pub const BOTH: [LatticeKind; 2] = [LatticeKind::Primal, LatticeKind::Dual];

    /// Axis along which this lattice's correlation surface separates its terminals.
    pub fn terminal_axis(self) -> Axis {
        match self {
            LatticeKind::Primal => Axis::Y,
            LatticeKind::Dual => Axis::X,
        }
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LatticeKind::Primal => "primal",
            LatticeKind::Dual => "dual",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Terminal {
    Low,
    High,
}

/// An entangling bond. `primal` and `dual` name the lattice of each endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    pub primal: SiteId,
    pub dual: SiteId,
}

impl Bond {
    pub fn endpoints(&self) -> [SiteId; 2] {
        [self.primal, self.dual]
    }

    pub fn endpoint(&self, kind: LatticeKind) -> SiteId {
        match kind {
            LatticeKind::Primal => self.primal,
            LatticeKind::Dual => self.dual,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cube {
    pub center: Site,
    pub kind: LatticeKind,
    pub faces: Vec<SiteId>,
}

/// Where a face leads on one side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceEnd {
    Cube(CubeId),
    Terminal(Terminal),
    Open,
}

/// Lattice size in unit cells.
///
/// The primal lattice spans `primal_cells` cells between its terminals and the
/// dual lattice `dual_cells`; the code distance of each is one more than that.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Extents {
    pub dual_cells: usize,
    pub primal_cells: usize,
    pub layers: usize,
}

impl Extents {
    pub fn for_distance(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::DistanceTooSmall(d));
        }
        Ok(Self {
            dual_cells: d - 1,
            primal_cells: d - 1,
            layers: 4 * d - 1,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.dual_cells == 0 || self.primal_cells == 0 {
            return Err(Error::InvalidExtents("need at least one unit cell per lattice".into()));
        }
        if self.layers < 3 || self.layers.is_multiple_of(2) {
            return Err(Error::InvalidExtents(format!(
                "layer count must be odd and at least 3, got {}",
                self.layers
            )));
        }
        Ok(())
    }

    fn x_range(&self) -> (i32, i32) {
        (1, 2 * self.dual_cells as i32 + 1)
    }

    fn y_range(&self) -> (i32, i32) {
        (0, 2 * self.primal_cells as i32)
    }

    fn z_range(&self) -> (i32, i32) {
        (0, self.layers as i32 - 1)
    }

    fn range(&self, axis: Axis) -> (i32, i32) {
        match axis {
            Axis::X => self.x_range(),
            Axis::Y => self.y_range(),
            Axis::Z => self.z_range(),
        }
    }

    pub fn contains(&self, s: &Site) -> bool {
        Axis::ALL.iter().all(|&a| {
            let (lo, hi) = self.range(a);
            (lo..=hi).contains(&s.coord(a))
        })
    }
}

/// One of the two interleaved check lattices.
///
/// Nodes are the cubes (`0..cube_count`) followed by the low and high
/// terminals. Every face qubit of the lattice is an edge between the nodes on
/// either side of it; faces on closed boundaries have one [`OPEN`] end.
#[derive(Clone, Debug)]
pub struct CheckLattice {
    kind: LatticeKind,
    cubes: Vec<Cube>,
    faces: Vec<SiteId>,
    local: Vec<u32>,
    ends: Vec<[NodeId; 2]>,
    perfect: Vec<bool>,
}

impl CheckLattice {
    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn cube_count(&self) -> usize {
        self.cubes.len()
    }

    pub fn node_count(&self) -> usize {
        self.cubes.len() + 2
    }

    pub fn terminal(&self, t: Terminal) -> NodeId {
        match t {
            Terminal::Low => self.cubes.len() as NodeId,
            Terminal::High => self.cubes.len() as NodeId + 1,
        }
    }

    /// Face qubits of this lattice, in canonical site order.
    pub fn faces(&self) -> &[SiteId] {
        &self.faces
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Local face index of a site, if the site belongs to this lattice.
    pub fn local_face(&self, site: SiteId) -> Option<usize> {
        match self.local.get(site) {
            Some(&i) if i != NO_SITE => Some(i as usize),
            _ => None,
        }
    }

    /// Raw node ids on both sides of a local face.
    pub fn face_nodes(&self, face: usize) -> [NodeId; 2] {
        self.ends[face]
    }

    pub fn face_ends(&self, face: usize) -> [FaceEnd; 2] {
        self.ends[face].map(|n| self.node_to_end(n))
    }

    pub fn node_to_end(&self, n: NodeId) -> FaceEnd {
        let c = self.cubes.len() as NodeId;
        if n == OPEN {
            FaceEnd::Open
        } else if n == c {
            FaceEnd::Terminal(Terminal::Low)
        } else if n == c + 1 {
            FaceEnd::Terminal(Terminal::High)
        } else {
            FaceEnd::Cube(n as CubeId)
        }
    }

    /// Whether the X measurement of this local face is always correct or absent.
    pub fn is_perfect(&self, face: usize) -> bool {
        self.perfect[face]
    }
}

/// Immutable description of a cluster-state lattice.
#[derive(Clone, Debug)]
pub struct LatticeGeometry {
    extents: Extents,
    sites: Vec<Site>,
    index: Vec<u32>,
    bonds: Vec<Bond>,
    incident: Vec<Vec<BondId>>,
    protected_bond: Vec<bool>,
    unprotected_bonds: Vec<BondId>,
    perfect_site: Vec<bool>,
    primal: CheckLattice,
    dual: CheckLattice,
}

/// Builds the standard lattice of code distance `d` with `4d - 1` layers.
pub fn build_lattice(d: usize) -> Result<LatticeGeometry> {
    LatticeGeometry::from_extents(Extents::for_distance(d)?)
}

impl LatticeGeometry {
    pub fn from_extents(extents: Extents) -> Result<Self> {
        extents.validate()?;
        let (x0, x1) = extents.x_range();
        let (y0, y1) = extents.y_range();
        let (z0, z1) = extents.z_range();
        let dims = [(x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize, (z1 - z0 + 1) as usize];

        let mut sites = Vec::new();
        let mut index = vec![NO_SITE; dims[0] * dims[1] * dims[2]];
        for z in z0..=z1 {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let s = Site::new(x, y, z);
                    if s.is_qubit() {
                        let slot = box_slot(&extents, &s);
                        index[slot] = sites.len() as u32;
                        sites.push(s);
                    }
                }
            }
        }

        let mut geometry = Self {
            extents,
            sites,
            index,
            bonds: Vec::new(),
            incident: Vec::new(),
            protected_bond: Vec::new(),
            unprotected_bonds: Vec::new(),
            perfect_site: Vec::new(),
            primal: empty_lattice(LatticeKind::Primal),
            dual: empty_lattice(LatticeKind::Dual),
        };
        geometry.link_bonds();
        geometry.mark_perfect_sites();
        geometry.primal = geometry.build_check_lattice(LatticeKind::Primal);
        geometry.dual = geometry.build_check_lattice(LatticeKind::Dual);
        Ok(geometry)
    }

    fn link_bonds(&mut self) {
        let zmax = self.extents.z_range().1;
        let mut incident = vec![Vec::with_capacity(4); self.sites.len()];
        for (id, s) in self.sites.iter().enumerate() {
            for axis in Axis::ALL {
                let t = s.shifted(axis, 1);
                let Some(other) = self.site_id(&t) else { continue };
                let bond = match s.kind() {
                    Some(LatticeKind::Primal) => Bond { primal: id, dual: other },
                    _ => Bond { primal: other, dual: id },
                };
                let bid = self.bonds.len();
                let both_low = s.z <= 1 && t.z <= 1;
                let both_high = s.z >= zmax - 1 && t.z >= zmax - 1;
                self.protected_bond.push(both_low || both_high);
                if !(both_low || both_high) {
                    self.unprotected_bonds.push(bid);
                }
                self.bonds.push(bond);
                incident[id].push(bid);
                incident[other].push(bid);
            }
        }
        self.incident = incident;
    }

    fn mark_perfect_sites(&mut self) {
        let zmax = self.extents.z_range().1;
        self.perfect_site = self
            .sites
            .iter()
            .map(|s| {
                // Primal qubits of the outer layers are read out perfectly; dual
                // qubits there carry the boundary surface codes and are never
                // measured. The next layer in holds the perfectly read dual qubits.
                let outer = s.z == 0 || s.z == zmax;
                let next = (s.z == 1 || s.z == zmax - 1) && s.kind() == Some(LatticeKind::Dual);
                outer || next
            })
            .collect();
    }

    fn is_cube_center(&self, kind: LatticeKind, c: &Site) -> bool {
        let parity_ok = match kind {
            LatticeKind::Primal => c.odd_count() == 3,
            LatticeKind::Dual => c.odd_count() == 0,
        };
        parity_ok && self.extents.contains(c)
    }

    fn build_check_lattice(&self, kind: LatticeKind) -> CheckLattice {
        let mut cubes = Vec::new();
        let mut cube_at = std::collections::HashMap::new();
        let (x0, x1) = self.extents.x_range();
        let (y0, y1) = self.extents.y_range();
        let (z0, z1) = self.extents.z_range();
        for z in z0..=z1 {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let c = Site::new(x, y, z);
                    if !self.is_cube_center(kind, &c) {
                        continue;
                    }
                    let faces = Axis::ALL
                        .iter()
                        .flat_map(|&a| [c.shifted(a, -1), c.shifted(a, 1)])
                        .filter_map(|f| self.site_id(&f))
                        .collect();
                    cube_at.insert(c, cubes.len());
                    cubes.push(Cube { center: c, kind, faces });
                }
            }
        }

        let n = cubes.len() as NodeId;
        let terminal_axis = kind.terminal_axis();
        let (t_lo, _) = self.extents.range(terminal_axis);
        let mut faces = Vec::new();
        let mut local = vec![NO_SITE; self.sites.len()];
        let mut ends = Vec::new();
        let mut perfect = Vec::new();
        for (id, s) in self.sites.iter().enumerate() {
            if s.kind() != Some(kind) {
                continue;
            }
            // The face normal is the axis along which the two owning cubes sit.
            let normal = Axis::ALL
                .into_iter()
                .find(|&a| {
                    let odd = s.coord(a).rem_euclid(2) == 1;
                    match kind {
                        LatticeKind::Primal => !odd,
                        LatticeKind::Dual => odd,
                    }
                })
                .expect("qubit has a face normal");
            let side = |delta: i32| -> NodeId {
                let c = s.shifted(normal, delta);
                if let Some(&cube) = cube_at.get(&c) {
                    cube as NodeId
                } else if normal == terminal_axis {
                    if s.coord(normal) == t_lo {
                        n
                    } else {
                        n + 1
                    }
                } else {
                    OPEN
                }
            };
            local[id] = faces.len() as u32;
            faces.push(id);
            ends.push([side(-1), side(1)]);
            perfect.push(self.perfect_site[id]);
        }

        CheckLattice {
            kind,
            cubes,
            faces,
            local,
            ends,
            perfect,
        }
    }

    pub fn extents(&self) -> Extents {
        self.extents
    }

    /// Code distance: the smaller of the two lattice distances.
    pub fn distance(&self) -> usize {
        self.extents.dual_cells.min(self.extents.primal_cells) + 1
    }

    pub fn layer_count(&self) -> usize {
        self.extents.layers
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, id: SiteId) -> Site {
        self.sites[id]
    }

    pub fn site_id(&self, s: &Site) -> Option<SiteId> {
        if !self.extents.contains(s) {
            return None;
        }
        match self.index[box_slot(&self.extents, s)] {
            NO_SITE => None,
            i => Some(i as SiteId),
        }
    }

    pub fn site_kind(&self, id: SiteId) -> LatticeKind {
        self.sites[id].kind().expect("stored sites are qubits")
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, id: BondId) -> Bond {
        self.bonds[id]
    }

    pub fn incident_bonds(&self, site: SiteId) -> &[BondId] {
        &self.incident[site]
    }

    /// Bonds that are allowed to fail, in canonical order.
    pub fn unprotected_bonds(&self) -> &[BondId] {
        &self.unprotected_bonds
    }

    /// Bonds touching only the first two or last two layers never fail.
    pub fn is_protected_bond(&self, id: BondId) -> bool {
        self.protected_bond[id]
    }

    /// Sites whose X outcome is never wrong (perfect or unmeasured boundary qubits).
    pub fn is_perfect_site(&self, id: SiteId) -> bool {
        self.perfect_site[id]
    }

    /// A site is in the bulk when all six axis neighbours lie inside the lattice box.
    pub fn is_bulk(&self, id: SiteId) -> bool {
        let s = self.sites[id];
        Axis::ALL
            .iter()
            .all(|&a| self.extents.contains(&s.shifted(a, -1)) && self.extents.contains(&s.shifted(a, 1)))
    }

    pub fn lattice(&self, kind: LatticeKind) -> &CheckLattice {
        match kind {
            LatticeKind::Primal => &self.primal,
            LatticeKind::Dual => &self.dual,
        }
    }

    pub fn neighbor_ids(&self, id: SiteId) -> impl Iterator<Item = SiteId> + '_ {
        self.incident[id].iter().map(move |&b| {
            let bond = self.bonds[b];
            if bond.primal == id {
                bond.dual
            } else {
                bond.primal
            }
        })
    }

    /// Bond-adjacent sites of `s`: the qubits `N(s)` of its cluster stabilizer.
    pub fn neighbors(&self, s: &Site) -> Result<Vec<Site>> {
        let id = self.site_id(s).ok_or(Error::UnknownSite {
            x: s.x,
            y: s.y,
            z: s.z,
        })?;
        Ok(self.neighbor_ids(id).map(|n| self.sites[n]).collect())
    }

    /// Length of the shortest error string joining the two terminals of a lattice.
    pub fn code_distance(&self, kind: LatticeKind) -> usize {
        code_distance(self, kind)
    }
}

fn box_slot(e: &Extents, s: &Site) -> usize {
    let (x0, x1) = e.x_range();
    let (y0, y1) = e.y_range();
    let (z0, _) = e.z_range();
    let nx = (x1 - x0 + 1) as usize;
    let ny = (y1 - y0 + 1) as usize;
    (((s.z - z0) as usize) * ny + (s.y - y0) as usize) * nx + (s.x - x0) as usize
}

fn empty_lattice(kind: LatticeKind) -> CheckLattice {
    CheckLattice {
        kind,
        cubes: Vec::new(),
        faces: Vec::new(),
        local: Vec::new(),
        ends: Vec::new(),
        perfect: Vec::new(),
    }
}

/// Breadth-first search from the low to the high terminal, one face per step.
pub fn code_distance(g: &LatticeGeometry, kind: LatticeKind) -> usize {
    let lat = g.lattice(kind);
    let nodes = lat.node_count();
    let mut adjacency = vec![Vec::new(); nodes];
    for f in 0..lat.face_count() {
        let [a, b] = lat.face_nodes(f);
        if a != OPEN && b != OPEN {
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
    }
    let start = lat.terminal(Terminal::Low);
    let goal = lat.terminal(Terminal::High);
    let mut dist = vec![usize::MAX; nodes];
    dist[start as usize] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        if u == goal {
            return dist[u as usize];
        }
        for &v in &adjacency[u as usize] {
            if dist[v as usize] == usize::MAX {
                dist[v as usize] = dist[u as usize] + 1;
                queue.push_back(v);
            }
        }
    }
    usize::MAX
}
