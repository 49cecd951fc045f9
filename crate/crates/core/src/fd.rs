//! Five-point finite differences on the closed subdomains and on the whole square.
//!
//! A subdomain problem keeps its outer boundary `∂Ω_i ∩ ∂Ω` as Dirichlet data and
//! takes either a Dirichlet or a Neumann condition on each of its two interface
//! edges. Neumann rows come from eliminating the ghost node with the centered
//! normal derivative:
//!
//! ```text
//!   edge node:  (4u0 - uL - uR - 2u_in) / h^2            = f0 + (2/h) g
//!   corner:     (4u0 - 2u_in1 - 2u_in2) / h^2            = f0 + (2/h) (g1 + g2)
//! ```
//!
//! [`extract_flux`] inverts exactly these rows, so a Neumann solve fed with the
//! flux extracted from a field reproduces that field. Rows are assembled scaled
//! by `h^2`, `h^2/2` and `h^2/4` respectively, which makes the matrix symmetric.

use std::collections::HashMap;
use std::ops::{Index, IndexMut};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::grid::{Grid, InterfaceId, NodeIndex, SubdomainId};
use crate::linsolve::{factorize, Factorization, SparseMatrix};
use crate::symmetry::GlobalField;

/// Nodal values on one closed subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct SubField {
    sub: SubdomainId,
    n: usize,
    values: Vec<f64>,
}

impl SubField {
    pub fn zeros(grid: &Grid, sub: SubdomainId) -> Self {
        let m = grid.n() + 1;
        Self {
            sub,
            n: grid.n(),
            values: vec![0.0; m * m],
        }
    }

    pub fn from_node_fn(grid: &Grid, sub: SubdomainId, f: impl FnMut(NodeIndex) -> f64) -> Self {
        Self {
            sub,
            n: grid.n(),
            values: grid.subdomain_nodes(sub).map(f).collect(),
        }
    }

    pub fn restrict(field: &GlobalField, sub: SubdomainId) -> Self {
        Self::from_node_fn(field.grid(), sub, |p| field[p])
    }

    pub fn sub(&self) -> SubdomainId {
        self.sub
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, p: NodeIndex) -> bool {
        self.sub.contains(self.n, p)
    }

    fn local(&self, p: NodeIndex) -> usize {
        debug_assert!(self.contains(p), "{p:?} not in {}", self.sub);
        let (i0, _, j0, _) = self.sub.bounds(self.n);
        ((p.j - j0) as usize) * (self.n + 1) + (p.i - i0) as usize
    }

    /// Node/value pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeIndex, f64)> + '_ {
        let (i0, i1, j0, j1) = self.sub.bounds(self.n);
        (j0..=j1)
            .flat_map(move |j| (i0..=i1).map(move |i| NodeIndex::new(i, j)))
            .zip(self.values.iter().copied())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `alpha * self + beta * other` on the same subdomain.
    pub fn axpby(&self, alpha: f64, other: &SubField, beta: f64) -> SubField {
        debug_assert_eq!(self.sub, other.sub);
        SubField {
            sub: self.sub,
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        }
    }
}

impl Index<NodeIndex> for SubField {
    type Output = f64;

    fn index(&self, p: NodeIndex) -> &f64 {
        &self.values[self.local(p)]
    }
}

impl IndexMut<NodeIndex> for SubField {
    fn index_mut(&mut self, p: NodeIndex) -> &mut f64 {
        let k = self.local(p);
        &mut self.values[k]
    }
}

/// Average the per-subdomain values at shared nodes into one global field.
pub fn assemble_global(grid: &Grid, fields: &[SubField]) -> Result<GlobalField> {
    let fields = by_subdomain(fields)?;
    Ok(GlobalField::from_node_fn(grid, |p| {
        let (sum, count) = fields
            .iter()
            .filter(|s| s.contains(p))
            .fold((0.0, 0usize), |(s, c), f| (s + f[p], c + 1));
        sum / count as f64
    }))
}

fn by_subdomain(fields: &[SubField]) -> Result<[&SubField; 4]> {
    let find = |s: SubdomainId| {
        fields
            .iter()
            .find(|f| f.sub == s)
            .ok_or(Error::MissingSubdomain(s))
    };
    Ok([
        find(SubdomainId::One)?,
        find(SubdomainId::Two)?,
        find(SubdomainId::Three)?,
        find(SubdomainId::Four)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceKind {
    /// Values on all `n + 1` interface nodes, outer endpoint to cross-point.
    DirichletValue,
    /// Outward normal derivative on the `n` nodes after the outer endpoint
    /// (open edge plus the cross-point).
    NormalFlux,
}

/// Ordered data along one interface, see [`TraceKind`] for the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    interface: InterfaceId,
    kind: TraceKind,
    values: Vec<f64>,
}

impl Trace {
    pub fn expected_len(kind: TraceKind, n: usize) -> usize {
        match kind {
            TraceKind::DirichletValue => n + 1,
            TraceKind::NormalFlux => n,
        }
    }

    pub fn new(interface: InterfaceId, kind: TraceKind, values: Vec<f64>) -> Self {
        Self {
            interface,
            kind,
            values,
        }
    }

    /// Build from a function of the interface nodes it covers.
    pub fn from_node_fn(
        n: usize,
        interface: InterfaceId,
        kind: TraceKind,
        mut f: impl FnMut(NodeIndex) -> f64,
    ) -> Self {
        let first = match kind {
            TraceKind::DirichletValue => 0,
            TraceKind::NormalFlux => 1,
        };
        let values = (first..=n).map(|t| f(interface.node(n, t))).collect();
        Self::new(interface, kind, values)
    }

    pub fn interface(&self) -> InterfaceId {
        self.interface
    }

    pub fn kind(&self) -> TraceKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at the `t`-th node of the interface (`t = 0` outer endpoint).
    pub fn at(&self, t: usize) -> f64 {
        match self.kind {
            TraceKind::DirichletValue => self.values[t],
            TraceKind::NormalFlux => {
                assert!(t >= 1, "flux traces start after the outer endpoint");
                self.values[t - 1]
            }
        }
    }

    /// Value at the cross-point.
    pub fn at_crosspoint(&self) -> f64 {
        *self.values.last().expect("traces are never empty")
    }

    pub fn scaled(&self, alpha: f64) -> Trace {
        self.axpby(alpha, self, 0.0)
    }

    /// Copy with the cross-point value replaced.
    pub fn with_crosspoint(&self, value: f64) -> Trace {
        let mut values = self.values.clone();
        *values.last_mut().expect("traces are never empty") = value;
        Trace { values, ..*self }
    }

    /// Pointwise `alpha * self + beta * other`; both traces must share layout.
    pub fn axpby(&self, alpha: f64, other: &Trace, beta: f64) -> Trace {
        debug_assert_eq!(self.kind, other.kind);
        debug_assert_eq!(self.values.len(), other.values.len());
        Trace {
            interface: self.interface,
            kind: self.kind,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EdgeCondition {
    Dirichlet(Trace),
    Neumann(Trace),
}

impl EdgeCondition {
    pub fn kind(&self) -> EdgeKind {
        match self {
            Self::Dirichlet(_) => EdgeKind::Dirichlet,
            Self::Neumann(_) => EdgeKind::Neumann,
        }
    }

    pub fn trace(&self) -> &Trace {
        match self {
            Self::Dirichlet(t) | Self::Neumann(t) => t,
        }
    }
}

/// Conditions on the two interface edges of a subdomain, in `sub.edges()` order.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBc {
    sub: SubdomainId,
    edges: [EdgeCondition; 2],
}

impl EdgeBc {
    pub fn new(n: usize, sub: SubdomainId, edges: [EdgeCondition; 2]) -> Result<Self> {
        for (cond, expected) in edges.iter().zip(sub.edges()) {
            let trace = cond.trace();
            if trace.interface != expected {
                return Err(Error::IncompleteBc {
                    sub,
                    reason: format!("expected data on {expected}, got {}", trace.interface),
                });
            }
            let kind = match cond {
                EdgeCondition::Dirichlet(_) => TraceKind::DirichletValue,
                EdgeCondition::Neumann(_) => TraceKind::NormalFlux,
            };
            if trace.kind != kind {
                return Err(Error::IncompleteBc {
                    sub,
                    reason: format!(
                        "{expected}: trace kind {:?} does not match condition",
                        trace.kind
                    ),
                });
            }
            if trace.values.len() != Trace::expected_len(kind, n) {
                return Err(Error::IncompleteBc {
                    sub,
                    reason: format!(
                        "{expected}: trace has {} values, expected {}",
                        trace.values.len(),
                        Trace::expected_len(kind, n)
                    ),
                });
            }
        }
        Ok(Self { sub, edges })
    }

    pub fn sub(&self) -> SubdomainId {
        self.sub
    }

    pub fn kinds(&self) -> [EdgeKind; 2] {
        [self.edges[0].kind(), self.edges[1].kind()]
    }

    pub fn edge(&self, slot: usize) -> &EdgeCondition {
        &self.edges[slot]
    }
}

/// Value chosen where two Dirichlet conditions meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DdRule {
    #[default]
    Average,
    /// Take the condition listed first (interface edge before outer boundary,
    /// `x = 0` edge before `y = 0` edge).
    First,
}

/// Condition enforced where a Dirichlet and a Neumann condition meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DnRule {
    #[default]
    DirichletWins,
}

/// Flux data assigned to the cross-point when every subdomain meeting there
/// takes summed Neumann data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NnRule {
    /// Every edge receives a quarter of the total corner residual of the four
    /// subdomains, so each subdomain sees half of it. The residual of the
    /// global equation at the origin vanishes for the monolithic solution,
    /// which keeps it a fixed point for any data.
    #[default]
    Balanced,
    /// Every edge receives the sum of the two corner fluxes on it, so a
    /// subdomain sees its own residual plus half of each neighbour's.
    PerEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CornerPolicy {
    pub dd_rule: DdRule,
    pub dn_rule: DnRule,
    pub nn_rule: NnRule,
}

impl CornerPolicy {
    fn combine(self, first: f64, second: f64) -> f64 {
        match self.dd_rule {
            DdRule::Average => 0.5 * (first + second),
            DdRule::First => first,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    Interior,
    Edge(usize),
    Corner,
}

/// Lattice geometry of one subdomain's interface edges.
#[derive(Debug, Clone, Copy)]
struct EdgeGeometry {
    normals: [(i32, i32); 2],
}

impl EdgeGeometry {
    fn new(sub: SubdomainId) -> Self {
        let e = sub.edges();
        Self {
            normals: [
                e[0].outward_normal(sub).expect("own edge"),
                e[1].outward_normal(sub).expect("own edge"),
            ],
        }
    }

    /// Which interface edge slot the (non-outer) node sits on, if any.
    fn slot(p: NodeIndex) -> Option<usize> {
        match (p.i == 0, p.j == 0) {
            (true, true) => None,
            (true, false) => Some(0),
            (false, true) => Some(1),
            (false, false) => None,
        }
    }

    /// Off-diagonal coefficients of the scaled row at `p`.
    fn neighbors(&self, p: NodeIndex, row: Row) -> Vec<(NodeIndex, f64)> {
        match row {
            Row::Interior => [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .into_iter()
                .map(|d| (p.offset(d), -1.0))
                .collect(),
            Row::Edge(s) => {
                let (nx, ny) = self.normals[s];
                vec![
                    (p.offset((ny, nx)), -0.5),
                    (p.offset((-ny, -nx)), -0.5),
                    (p.offset((-nx, -ny)), -1.0),
                ]
            }
            Row::Corner => self
                .normals
                .iter()
                .map(|&(nx, ny)| (p.offset((-nx, -ny)), -0.5))
                .collect(),
        }
    }

    fn diag(row: Row) -> f64 {
        match row {
            Row::Interior => 4.0,
            Row::Edge(_) => 2.0,
            Row::Corner => 1.0,
        }
    }

    /// Scale applied to the original `/h^2` row.
    fn row_scale(row: Row) -> f64 {
        match row {
            Row::Interior => 1.0,
            Row::Edge(_) => 0.5,
            Row::Corner => 0.25,
        }
    }
}

/// Unknown layout and factorized operator for one subdomain and edge-kind pair.
#[derive(Debug)]
struct SubdomainSystem {
    kinds: [EdgeKind; 2],
    geometry: EdgeGeometry,
    /// Row of each closed-subdomain node (row-major), `None` for prescribed nodes.
    unknown: Vec<Option<(usize, Row)>>,
    nodes: Vec<NodeIndex>,
    factor: Factorization,
}

impl SubdomainSystem {
    fn build(grid: &Grid, sub: SubdomainId, kinds: [EdgeKind; 2]) -> Result<Self> {
        let geometry = EdgeGeometry::new(sub);
        let nodes: Vec<NodeIndex> = grid.subdomain_nodes(sub).collect();
        let mut count = 0;
        let unknown: Vec<Option<(usize, Row)>> = nodes
            .iter()
            .map(|&p| {
                let row = Self::row_of(grid, kinds, p)?;
                let r = count;
                count += 1;
                Some((r, row))
            })
            .collect();
        let (i0, _, j0, _) = sub.bounds(grid.n());
        let m = grid.n() + 1;
        let at = |p: NodeIndex| ((p.j - j0) as usize) * m + (p.i - i0) as usize;

        let mut triplets = Vec::with_capacity(5 * count);
        for (k, &p) in nodes.iter().enumerate() {
            let Some((r, row)) = unknown[k] else { continue };
            triplets.push((r, r, EdgeGeometry::diag(row)));
            for (q, c) in geometry.neighbors(p, row) {
                if let Some((col, _)) = unknown[at(q)] {
                    triplets.push((r, col, c));
                }
            }
        }
        let matrix = SparseMatrix::from_triplets(count, count, triplets)?;
        let factor = factorize(&matrix)?;
        Ok(Self {
            kinds,
            geometry,
            unknown,
            nodes,
            factor,
        })
    }

    fn row_of(grid: &Grid, kinds: [EdgeKind; 2], p: NodeIndex) -> Option<Row> {
        if grid.is_outer_boundary(p) {
            return None;
        }
        if p == NodeIndex::ORIGIN {
            return (kinds == [EdgeKind::Neumann; 2]).then_some(Row::Corner);
        }
        match EdgeGeometry::slot(p) {
            Some(s) => (kinds[s] == EdgeKind::Neumann).then_some(Row::Edge(s)),
            None => Some(Row::Interior),
        }
    }

    fn solve(
        &self,
        grid: &Grid,
        sub: SubdomainId,
        f: &GlobalField,
        g: &GlobalField,
        bc: &EdgeBc,
        policy: CornerPolicy,
    ) -> Result<SubField> {
        debug_assert_eq!(bc.kinds(), self.kinds);
        let n = grid.n();
        let h = grid.h();
        // prescribed values first
        let mut out = SubField::zeros(grid, sub);
        for (k, &p) in self.nodes.iter().enumerate() {
            if self.unknown[k].is_none() {
                out.values[k] = prescribed_value(grid, p, g, bc, policy);
            }
        }
        let mut rhs = vec![0.0; self.factor.dim()];
        for (k, &p) in self.nodes.iter().enumerate() {
            let Some((r, row)) = self.unknown[k] else {
                continue;
            };
            let mut b = EdgeGeometry::row_scale(row) * h * h * f[p];
            match row {
                Row::Interior => {}
                Row::Edge(s) => {
                    let t = position_on(bc.edge(s).trace().interface, n, p);
                    b += h * bc.edge(s).trace().at(t);
                }
                Row::Corner => {
                    b += 0.5
                        * h
                        * (bc.edge(0).trace().at_crosspoint() + bc.edge(1).trace().at_crosspoint());
                }
            }
            for (q, c) in self.geometry.neighbors(p, row) {
                let kq = out.local(q);
                if self.unknown[kq].is_none() {
                    b -= c * out.values[kq];
                }
            }
            rhs[r] = b;
        }
        let x = self.factor.solve(&rhs)?;
        for (k, slot) in self.unknown.iter().enumerate() {
            if let Some((r, _)) = slot {
                out.values[k] = x[*r];
            }
        }
        Ok(out)
    }
}

/// Index `t` of node `p` along `edge` (0 = outer endpoint, n = cross-point).
fn position_on(edge: InterfaceId, n: usize, p: NodeIndex) -> usize {
    let n = n as i32;
    let t = match edge {
        InterfaceId::G12 => p.j + n,
        InterfaceId::G23 => n - p.i,
        InterfaceId::G34 => n - p.j,
        InterfaceId::G41 => p.i + n,
    };
    t as usize
}

/// Value enforced at a prescribed node of the closed subdomain.
fn prescribed_value(
    grid: &Grid,
    p: NodeIndex,
    g: &GlobalField,
    bc: &EdgeBc,
    policy: CornerPolicy,
) -> f64 {
    let n = grid.n();
    if grid.is_outer_boundary(p) {
        // outer endpoint of an interface: Dirichlet/Dirichlet junction or Dirichlet wins
        if let Some(s) = EdgeGeometry::slot(p) {
            if let EdgeCondition::Dirichlet(tr) = bc.edge(s) {
                return policy.combine(tr.at(0), g[p]);
            }
        }
        return g[p];
    }
    if p == NodeIndex::ORIGIN {
        return match (bc.edge(0), bc.edge(1)) {
            (EdgeCondition::Dirichlet(a), EdgeCondition::Dirichlet(b)) => {
                policy.combine(a.at_crosspoint(), b.at_crosspoint())
            }
            (EdgeCondition::Dirichlet(a), _) | (_, EdgeCondition::Dirichlet(a)) => {
                a.at_crosspoint()
            }
            _ => unreachable!("two Neumann edges make the cross-point an unknown"),
        };
    }
    let s = EdgeGeometry::slot(p).expect("prescribed interior nodes lie on an edge");
    let trace = bc.edge(s).trace();
    trace.at(position_on(trace.interface, n, p))
}

type SystemCache = HashMap<(SubdomainId, [EdgeKind; 2]), Arc<SubdomainSystem>>;

/// Cached factorizations for every subdomain / edge-kind combination on one grid.
#[derive(Debug)]
pub struct SubdomainSolver {
    grid: Grid,
    policy: CornerPolicy,
    cache: Mutex<SystemCache>,
}

impl SubdomainSolver {
    pub fn new(grid: &Grid, policy: CornerPolicy) -> Self {
        Self {
            grid: grid.clone(),
            policy,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn policy(&self) -> CornerPolicy {
        self.policy
    }

    fn system(&self, sub: SubdomainId, kinds: [EdgeKind; 2]) -> Result<Arc<SubdomainSystem>> {
        if let Some(s) = self.cache.lock().expect("cache lock").get(&(sub, kinds)) {
            return Ok(Arc::clone(s));
        }
        let built = Arc::new(SubdomainSystem::build(&self.grid, sub, kinds)?);
        let mut cache = self.cache.lock().expect("cache lock");
        Ok(Arc::clone(cache.entry((sub, kinds)).or_insert(built)))
    }

    /// Solve the subdomain problem: source `f`, outer Dirichlet data read from
    /// the boundary nodes of `g`, interface conditions `bc`.
    pub fn solve(&self, f: &GlobalField, g: &GlobalField, bc: &EdgeBc) -> Result<SubField> {
        f.check_same_grid(g)?;
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch {
                left: self.grid.n(),
                right: f.grid().n(),
            });
        }
        let system = self.system(bc.sub(), bc.kinds())?;
        system.solve(&self.grid, bc.sub(), f, g, bc, self.policy)
    }
}

/// One-off subdomain solve; see [`SubdomainSolver`] for repeated solves.
pub fn solve_subdomain(
    grid: &Grid,
    f: &GlobalField,
    g: &GlobalField,
    bc: &EdgeBc,
    policy: CornerPolicy,
) -> Result<SubField> {
    SubdomainSolver::new(grid, policy).solve(f, g, bc)
}

/// Outward normal derivative of `field` on `edge`, defined as the residual of the
/// ghost-eliminated Neumann row. The cross-point residual is split evenly between
/// the two edges meeting there.
pub fn extract_flux(
    grid: &Grid,
    field: &SubField,
    f: &GlobalField,
    edge: InterfaceId,
) -> Result<Trace> {
    let sub = field.sub();
    let normal = edge.outward_normal(sub)?;
    let n = grid.n();
    let h = grid.h();
    let geometry = EdgeGeometry::new(sub);
    let slot = sub
        .edges()
        .iter()
        .position(|&e| e == edge)
        .expect("adjacent");
    let residual = |p: NodeIndex, row: Row| {
        let lap = EdgeGeometry::diag(row) * field[p]
            + geometry
                .neighbors(p, row)
                .into_iter()
                .map(|(q, c)| c * field[q])
                .sum::<f64>();
        // unscale the row back to (.. / h^2 - f), then multiply by h/2
        (lap / (EdgeGeometry::row_scale(row) * h * h) - f[p]) * 0.5 * h
    };
    debug_assert_eq!(geometry.normals[slot], normal);
    let values = (1..=n)
        .map(|t| {
            let p = edge.node(n, t);
            if t == n {
                0.5 * residual(p, Row::Corner)
            } else {
                residual(p, Row::Edge(slot))
            }
        })
        .collect();
    Ok(Trace::new(edge, TraceKind::NormalFlux, values))
}

/// Two-sided normal derivative of a single-valued global field seen from `sub`:
/// half the difference of the residual fluxes on either side, which is the
/// centered difference `(u(p + n) - u(p - n)) / 2h` at open edge nodes.
pub fn centered_flux(
    grid: &Grid,
    field: &GlobalField,
    sub: SubdomainId,
    edge: InterfaceId,
) -> Result<Trace> {
    let other = edge.neighbor(sub)?;
    let zero = GlobalField::zeros(grid);
    let mine = extract_flux(grid, &SubField::restrict(field, sub), &zero, edge)?;
    let theirs = extract_flux(grid, &SubField::restrict(field, other), &zero, edge)?;
    Ok(mine.axpby(0.5, &theirs, -0.5))
}

/// Solve `-Δu = f` on the whole square with `u = g` on the outer boundary.
pub fn monolithic_solve(grid: &Grid, f: &GlobalField, g: &GlobalField) -> Result<GlobalField> {
    f.check_same_grid(g)?;
    let n = grid.n() as i32;
    let h = grid.h();
    let m = (2 * n - 1) as usize;
    let row = |p: NodeIndex| ((p.j + n - 1) as usize) * m + (p.i + n - 1) as usize;
    let interior = |p: NodeIndex| p.i.abs() < n && p.j.abs() < n;

    let mut triplets = Vec::with_capacity(5 * m * m);
    let mut rhs = vec![0.0; m * m];
    for j in (1 - n)..n {
        for i in (1 - n)..n {
            let p = NodeIndex::new(i, j);
            let r = row(p);
            triplets.push((r, r, 4.0));
            let mut b = h * h * f[p];
            for d in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let q = p.offset(d);
                if interior(q) {
                    triplets.push((r, row(q), -1.0));
                } else {
                    b += g[q];
                }
            }
            rhs[r] = b;
        }
    }
    let a = SparseMatrix::from_triplets(m * m, m * m, triplets)?;
    let x = factorize(&a)?.solve(&rhs)?;
    Ok(GlobalField::from_node_fn(grid, |p| {
        if interior(p) {
            x[row(p)]
        } else {
            g[p]
        }
    }))
}

/// `h * sqrt(sum v^2)` over the nodes of a global field.
pub fn l2_norm(grid: &Grid, field: &GlobalField) -> f64 {
    grid.h() * field.values().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `h * sqrt(sum v^2)` over the closed subdomain.
pub fn l2_norm_sub(grid: &Grid, field: &SubField) -> f64 {
    grid.h() * field.values().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Global L2 norm of a piecewise field: shared nodes are weighted by
/// `1 / multiplicity`, so a single-valued field gives the same result as
/// [`l2_norm`] on its global version.
pub fn l2_norm_piecewise(grid: &Grid, fields: &[SubField]) -> Result<f64> {
    let fields = by_subdomain(fields)?;
    let sum: f64 = fields
        .iter()
        .flat_map(|f| f.iter())
        .map(|(p, v)| v * v / grid.multiplicity(p) as f64)
        .sum();
    Ok(grid.h() * sum.sqrt())
}

/// Sum of the per-subdomain L2 norms.
pub fn subdomain_sum_l2(grid: &Grid, fields: &[SubField]) -> Result<f64> {
    Ok(by_subdomain(fields)?
        .iter()
        .map(|f| l2_norm_sub(grid, f))
        .sum())
}

/// `sum_i sqrt(|v_i|_L2^2 + h^2 sum |forward differences / h|^2)`, differences
/// taken only between nodes of the same closed subdomain.
pub fn broken_h1_norm(grid: &Grid, fields: &[SubField]) -> Result<f64> {
    Ok(by_subdomain(fields)?
        .iter()
        .map(|f| {
            let (i0, i1, j0, j1) = f.sub().bounds(grid.n());
            let mut grad = 0.0;
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let p = NodeIndex::new(i, j);
                    if i < i1 {
                        let d = f[p.offset((1, 0))] - f[p];
                        grad += d * d;
                    }
                    if j < j1 {
                        let d = f[p.offset((0, 1))] - f[p];
                        grad += d * d;
                    }
                }
            }
            // h^2 * sum (d/h)^2 == sum d^2
            let l2 = l2_norm_sub(grid, f);
            (l2 * l2 + grad).sqrt()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirichlet_from(grid: &Grid, sub: SubdomainId, u: &GlobalField) -> EdgeBc {
        let n = grid.n();
        let edges = sub.edges().map(|e| {
            EdgeCondition::Dirichlet(Trace::from_node_fn(n, e, TraceKind::DirichletValue, |p| {
                u[p]
            }))
        });
        EdgeBc::new(n, sub, edges).unwrap()
    }

    fn max_diff(a: &SubField, u: &GlobalField) -> f64 {
        a.iter().map(|(p, v)| (v - u[p]).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = Grid::new(6).unwrap();
        let z = GlobalField::zeros(&g);
        for sub in SubdomainId::ALL {
            let s = solve_subdomain(
                &g,
                &z,
                &z,
                &dirichlet_from(&g, sub, &z),
                CornerPolicy::default(),
            )
            .unwrap();
            assert_eq!(s.max_abs(), 0.0);
        }
    }

    #[test]
    fn linear_field_is_reproduced() {
        let g = Grid::new(7).unwrap();
        let z = GlobalField::zeros(&g);
        let u = GlobalField::from_fn(&g, |x, _| x);
        for sub in SubdomainId::ALL {
            let s = solve_subdomain(
                &g,
                &z,
                &u,
                &dirichlet_from(&g, sub, &u),
                CornerPolicy::default(),
            )
            .unwrap();
            assert!(max_diff(&s, &u) < 1e-14);
        }
    }

    #[test]
    fn neumann_edges_reproduce_y_on_omega2() {
        // u = y: outward derivative on Γ12 (normal -x) is 0, on Γ23 (normal +y) is 1.
        let g = Grid::new(8).unwrap();
        let n = g.n();
        let z = GlobalField::zeros(&g);
        let u = GlobalField::from_fn(&g, |_, y| y);
        let sub = SubdomainId::Two;
        let bc = EdgeBc::new(
            n,
            sub,
            [
                // the corner residual of u = y is 1, split evenly over both edges
                EdgeCondition::Neumann(Trace::from_node_fn(
                    n,
                    InterfaceId::G12,
                    TraceKind::NormalFlux,
                    |p| {
                        if p == NodeIndex::ORIGIN {
                            0.5
                        } else {
                            0.0
                        }
                    },
                )),
                EdgeCondition::Neumann(Trace::from_node_fn(
                    n,
                    InterfaceId::G23,
                    TraceKind::NormalFlux,
                    |p| {
                        if p == NodeIndex::ORIGIN {
                            0.5
                        } else {
                            1.0
                        }
                    },
                )),
            ],
        )
        .unwrap();
        let s = solve_subdomain(&g, &z, &u, &bc, CornerPolicy::default()).unwrap();
        assert!(max_diff(&s, &u) < 1e-13, "{}", max_diff(&s, &u));

        // and the residual flux of u = y recovers exactly that data
        let fl = extract_flux(&g, &SubField::restrict(&u, sub), &z, InterfaceId::G23).unwrap();
        for (t, v) in fl.values().iter().enumerate() {
            let expect = if t + 1 == n { 0.5 } else { 1.0 };
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn flux_of_constant_is_zero() {
        let g = Grid::new(5).unwrap();
        let z = GlobalField::zeros(&g);
        let c = SubField::from_node_fn(&g, SubdomainId::Three, |_| 2.5);
        for e in SubdomainId::Three.edges() {
            let fl = extract_flux(&g, &c, &z, e).unwrap();
            assert!(fl.values().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn flux_of_x_follows_normal_orientation() {
        let g = Grid::new(5).unwrap();
        let z = GlobalField::zeros(&g);
        let x = GlobalField::from_fn(&g, |x, _| x);
        // Ω2 sees Γ12 with outward normal -x: du/dn = -1 on the open edge.
        let fl = extract_flux(
            &g,
            &SubField::restrict(&x, SubdomainId::Two),
            &z,
            InterfaceId::G12,
        )
        .unwrap();
        for v in &fl.values()[..g.n() - 1] {
            assert!((v + 1.0).abs() < 1e-12);
        }
        // Ω1 sees it with +x.
        let fl = extract_flux(
            &g,
            &SubField::restrict(&x, SubdomainId::One),
            &z,
            InterfaceId::G12,
        )
        .unwrap();
        for v in &fl.values()[..g.n() - 1] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(extract_flux(
            &g,
            &SubField::restrict(&x, SubdomainId::Three),
            &z,
            InterfaceId::G12
        )
        .is_err());
    }

    #[test]
    fn corner_policy_average_at_crosspoint() {
        let g = Grid::new(4).unwrap();
        let n = g.n();
        let z = GlobalField::zeros(&g);
        let sub = SubdomainId::One;
        let bc = EdgeBc::new(
            n,
            sub,
            [
                EdgeCondition::Dirichlet(Trace::from_node_fn(
                    n,
                    InterfaceId::G12,
                    TraceKind::DirichletValue,
                    |_| 1.0,
                )),
                EdgeCondition::Dirichlet(Trace::from_node_fn(
                    n,
                    InterfaceId::G41,
                    TraceKind::DirichletValue,
                    |_| 3.0,
                )),
            ],
        )
        .unwrap();
        let s = solve_subdomain(&g, &z, &z, &bc, CornerPolicy::default()).unwrap();
        assert_eq!(s[NodeIndex::ORIGIN], 2.0);
        // outer endpoint of Γ12: average of trace 1 and g = 0
        assert_eq!(s[NodeIndex::new(0, -4)], 0.5);
        let first = CornerPolicy {
            dd_rule: DdRule::First,
            ..CornerPolicy::default()
        };
        let s = solve_subdomain(&g, &z, &z, &bc, first).unwrap();
        assert_eq!(s[NodeIndex::ORIGIN], 1.0);
    }

    #[test]
    fn dirichlet_wins_at_mixed_corner() {
        let g = Grid::new(4).unwrap();
        let n = g.n();
        let z = GlobalField::zeros(&g);
        let sub = SubdomainId::One;
        let bc = EdgeBc::new(
            n,
            sub,
            [
                EdgeCondition::Neumann(Trace::from_node_fn(
                    n,
                    InterfaceId::G12,
                    TraceKind::NormalFlux,
                    |_| 5.0,
                )),
                EdgeCondition::Dirichlet(Trace::from_node_fn(
                    n,
                    InterfaceId::G41,
                    TraceKind::DirichletValue,
                    |_| 3.0,
                )),
            ],
        )
        .unwrap();
        let s = solve_subdomain(&g, &z, &z, &bc, CornerPolicy::default()).unwrap();
        assert_eq!(s[NodeIndex::ORIGIN], 3.0);
        assert_eq!(s[NodeIndex::new(0, -4)], 0.0);
    }

    #[test]
    fn bc_validation() {
        let n = 4;
        let sub = SubdomainId::One;
        let ok = Trace::from_node_fn(n, InterfaceId::G41, TraceKind::DirichletValue, |_| 0.0);
        let wrong_edge =
            Trace::from_node_fn(n, InterfaceId::G23, TraceKind::DirichletValue, |_| 0.0);
        let r = EdgeBc::new(
            n,
            sub,
            [
                EdgeCondition::Dirichlet(wrong_edge),
                EdgeCondition::Dirichlet(ok.clone()),
            ],
        );
        assert!(matches!(r, Err(Error::IncompleteBc { .. })));
        let g12 = Trace::from_node_fn(n, InterfaceId::G12, TraceKind::DirichletValue, |_| 0.0);
        let r = EdgeBc::new(
            n,
            sub,
            [
                EdgeCondition::Neumann(g12),
                EdgeCondition::Dirichlet(ok.clone()),
            ],
        );
        assert!(matches!(r, Err(Error::IncompleteBc { .. })));
        let short = Trace::new(InterfaceId::G12, TraceKind::DirichletValue, vec![0.0; 2]);
        let r = EdgeBc::new(
            n,
            sub,
            [
                EdgeCondition::Dirichlet(short),
                EdgeCondition::Dirichlet(ok),
            ],
        );
        assert!(matches!(r, Err(Error::IncompleteBc { .. })));
    }

    #[test]
    fn monolithic_trivial_cases() {
        let g = Grid::new(6).unwrap();
        let z = GlobalField::zeros(&g);
        assert_eq!(monolithic_solve(&g, &z, &z).unwrap().max_abs(), 0.0);
        let xy = GlobalField::from_fn(&g, |x, y| x * y);
        let u = monolithic_solve(&g, &z, &xy.boundary_only()).unwrap();
        for p in g.nodes() {
            assert!((u[p] - xy[p]).abs() < 1e-14);
        }
    }

    #[test]
    fn norms_basic() {
        let g = Grid::new(10).unwrap();
        assert_eq!(l2_norm(&g, &GlobalField::zeros(&g)), 0.0);
        let one = GlobalField::from_fn(&g, |_, _| 1.0);
        assert!((l2_norm(&g, &one) - g.h() * 21.0).abs() < 1e-14);

        let subs: Vec<SubField> = SubdomainId::ALL
            .iter()
            .map(|&s| SubField::restrict(&one, s))
            .collect();
        assert!((l2_norm_piecewise(&g, &subs).unwrap() - l2_norm(&g, &one)).abs() < 1e-13);
        let h1 = broken_h1_norm(&g, &subs).unwrap();
        assert!((h1 - subdomain_sum_l2(&g, &subs).unwrap()).abs() < 1e-13);

        assert!(matches!(
            broken_h1_norm(&g, &subs[..3]),
            Err(Error::MissingSubdomain(SubdomainId::Four))
        ));
    }

    #[test]
    fn assemble_global_averages_shared_nodes() {
        let g = Grid::new(3).unwrap();
        let subs: Vec<SubField> = SubdomainId::ALL
            .iter()
            .map(|&s| SubField::from_node_fn(&g, s, |_| s.number() as f64))
            .collect();
        let glob = assemble_global(&g, &subs).unwrap();
        assert_eq!(glob[NodeIndex::ORIGIN], 2.5);
        assert_eq!(glob[NodeIndex::new(0, -2)], 1.5);
        assert_eq!(glob[NodeIndex::new(2, 2)], 3.0);
    }
}
