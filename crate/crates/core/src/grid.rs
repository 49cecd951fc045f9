//! Uniform Cartesian lattice on (-1,1)^2 split into four square subdomains.
//!
//! Nodes are addressed by integer lattice coordinates `(i, j)` in `[-n, n]^2`,
//! with physical position `(i*h, j*h)` and `h = 1/n`. The interfaces `x = 0`
//! and `y = 0` are grid lines and the cross-point is node `(0, 0)`.
//!
//! Subdomains are numbered counter-clockwise from the bottom-left quadrant:
//!
//! ```text
//!   +------+------+
//!   |  4   |  3   |
//!   +--G41-+-G23--+      G12 = {0} x (-1,0),  G34 = {0} x (0,1)
//!   |  1   |  2   |      G23 = (0,1) x {0},   G41 = (-1,0) x {0}
//!   +------+------+
//! ```
//!
//! Reflections act on the integer indices, so they are exact involutions.

use std::fmt;

use crate::error::{Error, Result};

/// Lattice node `(i, j)`, located at `(i*h, j*h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIndex {
    pub i: i32,
    pub j: i32,
}

impl NodeIndex {
    pub const fn new(i: i32, j: i32) -> Self {
        Self { i, j }
    }

    pub const ORIGIN: NodeIndex = NodeIndex::new(0, 0);

    pub fn offset(self, (di, dj): (i32, i32)) -> Self {
        Self::new(self.i + di, self.j + dj)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubdomainId {
    /// (-1,0) x (-1,0)
    One,
    /// (0,1) x (-1,0)
    Two,
    /// (0,1) x (0,1)
    Three,
    /// (-1,0) x (0,1)
    Four,
}

impl SubdomainId {
    pub const ALL: [SubdomainId; 4] = [Self::One, Self::Two, Self::Three, Self::Four];

    /// Zero-based position, handy for `[T; 4]` storage.
    pub fn index(self) -> usize {
        match self {
            Self::One => 0,
            Self::Two => 1,
            Self::Three => 2,
            Self::Four => 3,
        }
    }

    /// The label 1..=4.
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    /// `(-1)^i`: -1 for subdomains 1 and 3, +1 for 2 and 4.
    pub fn sign(self) -> f64 {
        if self.number().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Signs of the quadrant `(sign x, sign y)`.
    pub fn quadrant(self) -> (i32, i32) {
        match self {
            Self::One => (-1, -1),
            Self::Two => (1, -1),
            Self::Three => (1, 1),
            Self::Four => (-1, 1),
        }
    }

    /// The two interface edges of this subdomain: the one on `x = 0` first,
    /// then the one on `y = 0`.
    pub fn edges(self) -> [InterfaceId; 2] {
        match self {
            Self::One => [InterfaceId::G12, InterfaceId::G41],
            Self::Two => [InterfaceId::G12, InterfaceId::G23],
            Self::Three => [InterfaceId::G34, InterfaceId::G23],
            Self::Four => [InterfaceId::G34, InterfaceId::G41],
        }
    }

    pub fn has_edge(self, edge: InterfaceId) -> bool {
        self.edges().contains(&edge)
    }

    /// Closed lattice ranges `(i_min, i_max, j_min, j_max)`.
    pub fn bounds(self, n: usize) -> (i32, i32, i32, i32) {
        let n = n as i32;
        let (sx, sy) = self.quadrant();
        let (i0, i1) = if sx < 0 { (-n, 0) } else { (0, n) };
        let (j0, j1) = if sy < 0 { (-n, 0) } else { (0, n) };
        (i0, i1, j0, j1)
    }

    /// Whether `p` lies in the closed subdomain.
    pub fn contains(self, n: usize, p: NodeIndex) -> bool {
        let (i0, i1, j0, j1) = self.bounds(n);
        (i0..=i1).contains(&p.i) && (j0..=j1).contains(&p.j)
    }

    /// Image of this subdomain under a reflection.
    pub fn reflect(self, kind: Reflection) -> SubdomainId {
        let (sx, sy) = self.quadrant();
        let (sx, sy) = match kind {
            Reflection::X => (-sx, sy),
            Reflection::Y => (sx, -sy),
            Reflection::XY => (-sx, -sy),
        };
        Self::from_quadrant(sx, sy)
    }

    fn from_quadrant(sx: i32, sy: i32) -> Self {
        match (sx < 0, sy < 0) {
            (true, true) => Self::One,
            (false, true) => Self::Two,
            (false, false) => Self::Three,
            (true, false) => Self::Four,
        }
    }
}

impl fmt::Display for SubdomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Omega_{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InterfaceId {
    /// `{0} x (-1,0)`, between subdomains 1 and 2.
    G12,
    /// `(0,1) x {0}`, between subdomains 2 and 3.
    G23,
    /// `{0} x (0,1)`, between subdomains 3 and 4.
    G34,
    /// `(-1,0) x {0}`, between subdomains 4 and 1.
    G41,
}

impl InterfaceId {
    pub const ALL: [InterfaceId; 4] = [Self::G12, Self::G23, Self::G34, Self::G41];

    /// Adjacent subdomains in the order of the interface label.
    pub fn sides(self) -> (SubdomainId, SubdomainId) {
        use SubdomainId::*;
        match self {
            Self::G12 => (One, Two),
            Self::G23 => (Two, Three),
            Self::G34 => (Three, Four),
            Self::G41 => (Four, One),
        }
    }

    /// The subdomain across this interface from `sub`.
    pub fn neighbor(self, sub: SubdomainId) -> Result<SubdomainId> {
        let (a, b) = self.sides();
        if sub == a {
            Ok(b)
        } else if sub == b {
            Ok(a)
        } else {
            Err(Error::EdgeNotAdjacent { sub, edge: self })
        }
    }

    /// True for the interfaces lying on `x = 0`.
    pub fn is_vertical(self) -> bool {
        matches!(self, Self::G12 | Self::G34)
    }

    /// `t`-th node along the closed segment, `t = 0` being the outer boundary
    /// endpoint and `t = n` the cross-point.
    pub fn node(self, n: usize, t: usize) -> NodeIndex {
        let (n, t) = (n as i32, t as i32);
        match self {
            Self::G12 => NodeIndex::new(0, -n + t),
            Self::G23 => NodeIndex::new(n - t, 0),
            Self::G34 => NodeIndex::new(0, n - t),
            Self::G41 => NodeIndex::new(-n + t, 0),
        }
    }

    /// All `n + 1` nodes of the closed segment, outer endpoint first, cross-point last.
    pub fn nodes(self, n: usize) -> Vec<NodeIndex> {
        (0..=n).map(|t| self.node(n, t)).collect()
    }

    /// Unit lattice step from `sub` towards this interface (outward normal of `sub`).
    pub fn outward_normal(self, sub: SubdomainId) -> Result<(i32, i32)> {
        if !sub.has_edge(self) {
            return Err(Error::EdgeNotAdjacent { sub, edge: self });
        }
        let (sx, sy) = sub.quadrant();
        Ok(if self.is_vertical() {
            (-sx, 0)
        } else {
            (0, -sy)
        })
    }

    /// Image of this interface under a reflection.
    pub fn reflect(self, kind: Reflection) -> InterfaceId {
        let (a, b) = self.sides();
        let (a, b) = (a.reflect(kind), b.reflect(kind));
        Self::ALL
            .into_iter()
            .find(|e| {
                let (x, y) = e.sides();
                (x == a && y == b) || (x == b && y == a)
            })
            .expect("reflections permute the interfaces")
    }
}

impl fmt::Display for InterfaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::G12 => "Gamma_12",
            Self::G23 => "Gamma_23",
            Self::G34 => "Gamma_34",
            Self::G41 => "Gamma_41",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior(SubdomainId),
    Interface(InterfaceId),
    CrossPoint,
    OuterBoundary,
    BoundaryCrossPoint,
}

impl NodeClass {
    /// Class with any subdomain/interface label mapped through a reflection.
    pub fn reflect(self, kind: Reflection) -> NodeClass {
        match self {
            Self::Interior(s) => Self::Interior(s.reflect(kind)),
            Self::Interface(e) => Self::Interface(e.reflect(kind)),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reflection {
    /// `(x, y) -> (-x, y)`
    X,
    /// `(x, y) -> (x, -y)`
    Y,
    /// `(x, y) -> (-x, -y)`
    XY,
}

impl Reflection {
    pub fn apply(self, p: NodeIndex) -> NodeIndex {
        match self {
            Self::X => NodeIndex::new(-p.i, p.j),
            Self::Y => NodeIndex::new(p.i, -p.j),
            Self::XY => NodeIndex::new(-p.i, -p.j),
        }
    }
}

/// Symmetric `(2n+1) x (2n+1)` lattice with meshsize `h = 1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGridSize(n));
        }
        Ok(Self {
            n,
            h: 1.0 / n as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Nodes per axis, `2n + 1`.
    pub fn side(&self) -> usize {
        2 * self.n + 1
    }

    pub fn num_nodes(&self) -> usize {
        self.side() * self.side()
    }

    pub fn contains(&self, p: NodeIndex) -> bool {
        let n = self.n as i32;
        p.i.abs() <= n && p.j.abs() <= n
    }

    fn check(&self, p: NodeIndex) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                i: p.i,
                j: p.j,
                n: self.n,
            })
        }
    }

    /// Row-major position of `p` (x fastest), used as storage offset.
    pub fn linear(&self, p: NodeIndex) -> usize {
        debug_assert!(self.contains(p));
        let n = self.n as i32;
        ((p.j + n) as usize) * self.side() + (p.i + n) as usize
    }

    pub fn node_at(&self, k: usize) -> NodeIndex {
        let n = self.n as i32;
        let side = self.side();
        NodeIndex::new((k % side) as i32 - n, (k / side) as i32 - n)
    }

    /// All nodes in row-major order (y outer, x inner).
    pub fn nodes(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        (0..self.num_nodes()).map(|k| self.node_at(k))
    }

    pub fn coords(&self, p: NodeIndex) -> (f64, f64) {
        (p.i as f64 * self.h, p.j as f64 * self.h)
    }

    pub fn is_outer_boundary(&self, p: NodeIndex) -> bool {
        let n = self.n as i32;
        p.i.abs() == n || p.j.abs() == n
    }

    pub fn classify(&self, p: NodeIndex) -> Result<NodeClass> {
        self.check(p)?;
        Ok(if p == NodeIndex::ORIGIN {
            NodeClass::CrossPoint
        } else if self.is_outer_boundary(p) {
            if p.i == 0 || p.j == 0 {
                NodeClass::BoundaryCrossPoint
            } else {
                NodeClass::OuterBoundary
            }
        } else if p.i == 0 {
            NodeClass::Interface(if p.j < 0 {
                InterfaceId::G12
            } else {
                InterfaceId::G34
            })
        } else if p.j == 0 {
            NodeClass::Interface(if p.i > 0 {
                InterfaceId::G23
            } else {
                InterfaceId::G41
            })
        } else {
            NodeClass::Interior(SubdomainId::from_quadrant(p.i.signum(), p.j.signum()))
        })
    }

    pub fn reflect(&self, p: NodeIndex, kind: Reflection) -> NodeIndex {
        kind.apply(p)
    }

    /// Nodes of the closed subdomain in row-major order.
    pub fn subdomain_nodes(&self, sub: SubdomainId) -> impl Iterator<Item = NodeIndex> {
        let (i0, i1, j0, j1) = sub.bounds(self.n);
        (j0..=j1).flat_map(move |j| (i0..=i1).map(move |i| NodeIndex::new(i, j)))
    }

    /// Number of closed subdomains containing `p` (1, 2 or 4).
    pub fn multiplicity(&self, p: NodeIndex) -> usize {
        match (p.i == 0, p.j == 0) {
            (true, true) => 4,
            (true, false) | (false, true) => 2,
            (false, false) => 1,
        }
    }
}
