//! Standard, mixed and combined Neumann-Neumann iterations.
//!
//! Every iteration is a *first* step computing `u^k` from `(u^{k-1}, psi^{k-1})`
//! followed by a *second* step computing the correction `psi^k` from `u^k`:
//!
//! | scheme   | `u` on Γ12, Γ34 | `u` on Γ23, Γ41 | `psi` on Γ12, Γ34 | `psi` on Γ23, Γ41 |
//! |----------|-----------------|-----------------|-------------------|-------------------|
//! | standard | Dirichlet       | Dirichlet       | Neumann           | Neumann           |
//! | mixed    | Neumann         | Dirichlet       | Dirichlet         | Neumann           |
//!
//! The combined method splits the data into even and odd parts, runs the
//! standard scheme on the even part and the mixed scheme on the odd part, and
//! adds the iterates.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fd::{
    broken_h1_norm, centered_flux, extract_flux, l2_norm_piecewise, monolithic_solve,
    subdomain_sum_l2, CornerPolicy, EdgeBc, EdgeCondition, NnRule, SubField, SubdomainSolver,
    Trace, TraceKind,
};
use crate::grid::{Grid, InterfaceId, NodeIndex, SubdomainId};
use crate::symmetry::{decompose_even_odd, GlobalField};

/// Default blow-up threshold: `l2_error(k) > 1e3 * l2_error(1)`.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Nodes within this many mesh widths of the cross-point enter the diagnostic.
pub const CROSSPOINT_RADIUS: i32 = 2;

/// Relative error below which contraction ratios are not used as the
/// asymptotic estimate.
pub const RATIO_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    Standard,
    Mixed,
    /// Standard on the even part, mixed on the odd part.
    New,
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Standard => "standard",
            Self::Mixed => "mixed",
            Self::New => "new",
        })
    }
}

/// A single-track iteration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Standard,
    Mixed,
}

impl Scheme {
    /// Interfaces carrying a Dirichlet condition for `u` in the first step.
    fn u_dirichlet(self, edge: InterfaceId) -> bool {
        match self {
            Self::Standard => true,
            Self::Mixed => matches!(edge, InterfaceId::G23 | InterfaceId::G41),
        }
    }

    /// Interfaces carrying a Dirichlet condition for `psi` in the second step.
    fn psi_dirichlet(self, edge: InterfaceId) -> bool {
        match self {
            Self::Standard => false,
            Self::Mixed => matches!(edge, InterfaceId::G12 | InterfaceId::G34),
        }
    }
}

/// `(u^k, psi^k)` on all four subdomains.
#[derive(Debug, Clone, PartialEq)]
pub struct IterState {
    pub k: usize,
    pub theta: f64,
    pub u: [SubField; 4],
    pub psi: [SubField; 4],
}

impl IterState {
    pub fn u(&self, sub: SubdomainId) -> &SubField {
        &self.u[sub.index()]
    }

    pub fn psi(&self, sub: SubdomainId) -> &SubField {
        &self.psi[sub.index()]
    }
}

/// Source, outer boundary data and the shared subdomain solver.
#[derive(Debug, Clone)]
pub struct Problem {
    grid: Grid,
    f: GlobalField,
    g: GlobalField,
    zero: GlobalField,
    solver: Arc<SubdomainSolver>,
}

impl Problem {
    pub fn new(grid: &Grid, f: GlobalField, g: GlobalField, policy: CornerPolicy) -> Result<Self> {
        Self::with_solver(Arc::new(SubdomainSolver::new(grid, policy)), f, g)
    }

    /// Reuse the factorizations of an existing solver on the same grid.
    pub fn with_solver(
        solver: Arc<SubdomainSolver>,
        f: GlobalField,
        g: GlobalField,
    ) -> Result<Self> {
        let grid = solver.grid().clone();
        let zero = GlobalField::zeros(&grid);
        f.check_same_grid(&zero)?;
        g.check_same_grid(&zero)?;
        Ok(Self {
            grid,
            f,
            g: g.boundary_only(),
            zero,
            solver,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn f(&self) -> &GlobalField {
        &self.f
    }

    pub fn g(&self) -> &GlobalField {
        &self.g
    }

    pub fn solver(&self) -> &Arc<SubdomainSolver> {
        &self.solver
    }

    /// Discrete solution of the undecomposed problem.
    pub fn reference(&self) -> Result<GlobalField> {
        monolithic_solve(&self.grid, &self.f, &self.g)
    }

    fn dirichlet_trace(&self, edge: InterfaceId, value: impl Fn(NodeIndex) -> f64) -> Trace {
        Trace::from_node_fn(self.grid.n(), edge, TraceKind::DirichletValue, value)
    }

    fn flux(&self, field: &SubField, with_source: bool, edge: InterfaceId) -> Result<Trace> {
        let f = if with_source { &self.f } else { &self.zero };
        extract_flux(&self.grid, field, f, edge)
    }

    fn solve_all(
        &self,
        with_source: bool,
        bc: impl Fn(SubdomainId) -> Result<EdgeBc> + Sync,
    ) -> Result<[SubField; 4]> {
        let (f, g) = if with_source {
            (&self.f, &self.g)
        } else {
            (&self.zero, &self.zero)
        };
        let fields: Vec<SubField> = SubdomainId::ALL
            .par_iter()
            .map(|&sub| self.solver.solve(f, g, &bc(sub)?))
            .collect::<Result<_>>()?;
        Ok(fields.try_into().expect("four subdomains"))
    }
}

/// Initial couple: `u^0` equals `g` on the outer boundary and vanishes elsewhere,
/// `psi^0 = 0`.
pub fn init_state(grid: &Grid, g: &GlobalField, theta: f64) -> IterState {
    let lift = g.boundary_only();
    IterState {
        k: 0,
        theta,
        u: SubdomainId::ALL.map(|s| SubField::restrict(&lift, s)),
        psi: SubdomainId::ALL.map(|s| SubField::zeros(grid, s)),
    }
}

fn relaxed_dirichlet(
    problem: &Problem,
    state: &IterState,
    sub: SubdomainId,
    edge: InterfaceId,
) -> Result<Trace> {
    let other = edge.neighbor(sub)?;
    let (u, psi_i, psi_j) = (state.u(sub), state.psi(sub), state.psi(other));
    let theta = state.theta;
    Ok(problem.dirichlet_trace(edge, |p| u[p] - theta * (psi_i[p] + psi_j[p])))
}

/// Summed outward fluxes `d_{n_i} v_i + d_{n_j} v_j` on `edge`.
fn flux_sum(
    problem: &Problem,
    fields: &[SubField; 4],
    with_source: bool,
    edge: InterfaceId,
) -> Result<Trace> {
    let (a, b) = edge.sides();
    let fa = problem.flux(&fields[a.index()], with_source, edge)?;
    let fb = problem.flux(&fields[b.index()], with_source, edge)?;
    Ok(fa.axpby(1.0, &fb, 1.0))
}

/// Standard first step: relaxed Dirichlet data on both interface edges.
pub fn dirichlet_step_standard(problem: &Problem, state: &IterState) -> Result<[SubField; 4]> {
    problem.solve_all(true, |sub| {
        let edges = sub
            .edges()
            .map(|e| relaxed_dirichlet(problem, state, sub, e).map(EdgeCondition::Dirichlet));
        let [a, b] = edges;
        EdgeBc::new(problem.grid.n(), sub, [a?, b?])
    })
}

/// Standard second step: Neumann data equal to the summed fluxes of `u` on
/// both edges, homogeneous source and outer data. The cross-point value follows
/// the solver's [`NnRule`].
pub fn neumann_step_standard(problem: &Problem, u: &[SubField; 4]) -> Result<[SubField; 4]> {
    let sums: Vec<Trace> = InterfaceId::ALL
        .iter()
        .map(|&e| flux_sum(problem, u, true, e))
        .collect::<Result<_>>()?;
    let sums = match problem.solver.policy().nn_rule {
        NnRule::PerEdge => sums,
        NnRule::Balanced => {
            let total: f64 = sums.iter().map(Trace::at_crosspoint).sum();
            sums.iter()
                .map(|t| t.with_crosspoint(0.25 * total))
                .collect()
        }
    };
    let sum_on =
        |e: InterfaceId| sums[InterfaceId::ALL.iter().position(|&x| x == e).unwrap()].clone();
    problem.solve_all(false, |sub| {
        let [a, b] = sub.edges();
        EdgeBc::new(
            problem.grid.n(),
            sub,
            [
                EdgeCondition::Neumann(sum_on(a)),
                EdgeCondition::Neumann(sum_on(b)),
            ],
        )
    })
}

/// Mixed first step. On Γ23 and Γ41 `u` takes the relaxed Dirichlet data; on
/// Γ12 and Γ34 it takes the relaxed flux
///
/// ```text
///   d_{n_i} u_i^{k-1} + (-1)^i θ (d_{n_a} psi_a^{k-1} + d_{n_a} psi_b^{k-1})
/// ```
///
/// where `(a, b)` are the sides of the interface in label order, so both psi
/// derivatives are taken along the common normal `n_a` (`d_{n_a} = -d_{n_b}`).
/// At `k = 0` the iterate is a single-valued field and its flux is the
/// two-sided difference.
pub fn first_step_mixed(problem: &Problem, state: &IterState) -> Result<[SubField; 4]> {
    let grid = &problem.grid;
    let initial = if state.k == 0 {
        Some(crate::fd::assemble_global(grid, &state.u)?)
    } else {
        None
    };
    problem.solve_all(true, |sub| {
        let conds = sub.edges().map(|edge| -> Result<EdgeCondition> {
            if Scheme::Mixed.u_dirichlet(edge) {
                return relaxed_dirichlet(problem, state, sub, edge).map(EdgeCondition::Dirichlet);
            }
            let (a, b) = edge.sides();
            let own = match &initial {
                Some(u0) => centered_flux(grid, u0, sub, edge)?,
                None => problem.flux(state.u(sub), true, edge)?,
            };
            let psi_a = problem.flux(state.psi(a), false, edge)?;
            let psi_b = problem.flux(state.psi(b), false, edge)?;
            let common = psi_a.axpby(1.0, &psi_b, -1.0);
            Ok(EdgeCondition::Neumann(own.axpby(
                1.0,
                &common,
                sub.sign() * state.theta,
            )))
        });
        let [a, b] = conds;
        EdgeBc::new(grid.n(), sub, [a?, b?])
    })
}

/// Mixed second step: `psi_i = u_i - u_j` on Γ12 and Γ34, summed fluxes of `u`
/// on Γ23 and Γ41.
pub fn second_step_mixed(problem: &Problem, u: &[SubField; 4]) -> Result<[SubField; 4]> {
    problem.solve_all(false, |sub| {
        let conds = sub.edges().map(|edge| -> Result<EdgeCondition> {
            if Scheme::Mixed.psi_dirichlet(edge) {
                let other = edge.neighbor(sub)?;
                let (ui, uj) = (&u[sub.index()], &u[other.index()]);
                Ok(EdgeCondition::Dirichlet(
                    problem.dirichlet_trace(edge, |p| ui[p] - uj[p]),
                ))
            } else {
                Ok(EdgeCondition::Neumann(flux_sum(problem, u, true, edge)?))
            }
        });
        let [a, b] = conds;
        EdgeBc::new(problem.grid.n(), sub, [a?, b?])
    })
}

/// One full iteration `k -> k + 1`.
pub fn step(problem: &Problem, state: &IterState, scheme: Scheme) -> Result<IterState> {
    let (u, psi) = match scheme {
        Scheme::Standard => {
            let u = dirichlet_step_standard(problem, state)?;
            let psi = neumann_step_standard(problem, &u)?;
            (u, psi)
        }
        Scheme::Mixed => {
            let u = first_step_mixed(problem, state)?;
            let psi = second_step_mixed(problem, &u)?;
            (u, psi)
        }
    };
    Ok(IterState {
        k: state.k + 1,
        theta: state.theta,
        u,
        psi,
    })
}

/// `max |psi|` over nodes within two mesh widths of the cross-point.
pub fn crosspoint_diagnostic(psi: &[SubField]) -> f64 {
    let r = CROSSPOINT_RADIUS;
    psi.iter()
        .flat_map(|f| f.iter())
        .filter(|(p, _)| p.i * p.i + p.j * p.j <= r * r)
        .fold(0.0, |m, (_, v)| m.max(v.abs()))
}

/// Pointwise `reference|Ω_i - u_i`.
pub fn errors(reference: &GlobalField, u: &[SubField; 4]) -> [SubField; 4] {
    let grid = reference.grid();
    SubdomainId::ALL.map(|s| {
        let ui = &u[s.index()];
        SubField::from_node_fn(grid, s, |p| reference[p] - ui[p])
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    /// Global L2 norm of the error (shared nodes weighted by 1/multiplicity).
    pub l2_error: f64,
    pub broken_h1_error: f64,
    /// Sum of the per-subdomain L2 error norms.
    pub subdomain_sum_l2: f64,
    /// `l2_error(k) / l2_error(k-1)` for `k >= 1`.
    pub contraction_ratio: Option<f64>,
    pub psi_crosspoint_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Converged(usize),
    MaxIterations,
    Diverged(usize),
    SolverFailure { k: usize, message: String },
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Converged(k) => write!(f, "converged at iteration {k}"),
            Self::MaxIterations => f.write_str("maximum iterations reached"),
            Self::Diverged(k) => write!(f, "diverged at iteration {k}"),
            Self::SolverFailure { k, message } => {
                write!(f, "solver failure at iteration {k}: {message}")
            }
        }
    }
}

impl RunStatus {
    /// Short label used in `history.csv`.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Converged(_) => "converged",
            Self::MaxIterations => "max_iterations",
            Self::Diverged(_) => "diverged",
            Self::SolverFailure { .. } => "solver_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub method: MethodKind,
    pub theta: f64,
    pub records: Vec<IterRecord>,
    pub status: RunStatus,
}

impl RunHistory {
    pub fn record(&self, k: usize) -> Option<&IterRecord> {
        self.records.iter().find(|r| r.k == k)
    }

    pub fn l2_error(&self, k: usize) -> Option<f64> {
        self.record(k).map(|r| r.l2_error)
    }

    /// Contraction ratio at the last iteration `k >= 2` whose error is still
    /// above `RATIO_FLOOR` times the initial error; ratios closer to the
    /// rounding level are noise. Falls back to the last defined ratio.
    pub fn asymptotic_ratio(&self) -> Option<f64> {
        let floor = RATIO_FLOOR * self.records.first()?.l2_error;
        self.records
            .iter()
            .rev()
            .filter(|r| r.k >= 2 && r.l2_error >= floor)
            .find_map(|r| r.contraction_ratio)
            .or_else(|| self.records.iter().rev().find_map(|r| r.contraction_ratio))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParams {
    pub method: MethodKind,
    pub theta: f64,
    pub max_iter: usize,
    /// Stop once `l2_error(k) <= tol * l2_error(0)`.
    pub tol: f64,
    pub divergence_factor: f64,
    pub policy: CornerPolicy,
}

impl RunParams {
    pub fn new(method: MethodKind, theta: f64) -> Self {
        Self {
            method,
            theta,
            max_iter: 50,
            tol: 1e-10,
            divergence_factor: DIVERGENCE_FACTOR,
            policy: CornerPolicy::default(),
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub history: RunHistory,
    /// Final iterate and correction (summed over tracks for the combined method).
    pub state: IterState,
    pub reference: GlobalField,
    /// Per-track histories of the combined method: `[even, odd]`. Empty otherwise.
    pub components: Vec<RunHistory>,
}

struct Track {
    problem: Problem,
    scheme: Scheme,
    state: IterState,
    reference: GlobalField,
    records: Vec<IterRecord>,
}

impl Track {
    fn new(problem: Problem, scheme: Scheme, theta: f64) -> Result<Self> {
        let reference = problem.reference()?;
        let state = init_state(problem.grid(), problem.g(), theta);
        Ok(Self {
            problem,
            scheme,
            state,
            reference,
            records: Vec::new(),
        })
    }

    fn advance(&mut self) -> Result<()> {
        self.state = step(&self.problem, &self.state, self.scheme)?;
        Ok(())
    }
}

fn measure(
    grid: &Grid,
    reference: &GlobalField,
    state: &IterState,
    prev: Option<&IterRecord>,
) -> Result<IterRecord> {
    let e = errors(reference, &state.u);
    let l2_error = l2_norm_piecewise(grid, &e)?;
    let contraction_ratio = match prev {
        Some(p) if p.l2_error > 0.0 => Some(l2_error / p.l2_error),
        _ => None,
    };
    Ok(IterRecord {
        k: state.k,
        l2_error,
        broken_h1_error: broken_h1_norm(grid, &e)?,
        subdomain_sum_l2: subdomain_sum_l2(grid, &e)?,
        contraction_ratio,
        psi_crosspoint_max: crosspoint_diagnostic(&state.psi),
    })
}

fn sum_states(a: &IterState, b: &IterState) -> IterState {
    let add = |x: &[SubField; 4], y: &[SubField; 4]| {
        SubdomainId::ALL.map(|s| x[s.index()].axpby(1.0, &y[s.index()], 1.0))
    };
    IterState {
        k: a.k,
        theta: a.theta,
        u: add(&a.u, &b.u),
        psi: add(&a.psi, &b.psi),
    }
}

/// Iterate until the relative error drops below `tol`, the error blows up, or
/// `max_iter` iterations have been taken. Errors are measured against the
/// discrete monolithic solution.
pub fn run(
    grid: &Grid,
    f: &GlobalField,
    g: &GlobalField,
    params: &RunParams,
) -> Result<RunOutcome> {
    if params.tol.is_nan() || params.tol <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "tol must be positive, got {}",
            params.tol
        )));
    }
    let solver = Arc::new(SubdomainSolver::new(grid, params.policy));
    let full = Problem::with_solver(Arc::clone(&solver), f.clone(), g.clone())?;
    let reference = full.reference()?;
    let theta = params.theta;

    let mut tracks = match params.method {
        MethodKind::Standard => vec![Track::new(full, Scheme::Standard, theta)?],
        MethodKind::Mixed => vec![Track::new(full, Scheme::Mixed, theta)?],
        MethodKind::New => {
            let (fe, fo) = decompose_even_odd(f);
            let (ge, go) = decompose_even_odd(&g.boundary_only());
            let even = Problem::with_solver(Arc::clone(&solver), fe, ge)?;
            let odd = Problem::with_solver(Arc::clone(&solver), fo, go)?;
            vec![
                Track::new(even, Scheme::Standard, theta)?,
                Track::new(odd, Scheme::Mixed, theta)?,
            ]
        }
    };

    let combined = |tracks: &[Track]| -> IterState {
        let mut it = tracks.iter();
        let first = it.next().expect("at least one track").state.clone();
        it.fold(first, |acc, t| sum_states(&acc, &t.state))
    };

    let mut records = vec![measure(grid, &reference, &combined(&tracks), None)?];
    if tracks.len() > 1 {
        for t in tracks.iter_mut() {
            let r = measure(grid, &t.reference, &t.state, None)?;
            t.records.push(r);
        }
    }
    let initial_error = records[0].l2_error;
    let mut status = if initial_error == 0.0 {
        RunStatus::Converged(0)
    } else {
        RunStatus::MaxIterations
    };

    let mut k = 0;
    while status == RunStatus::MaxIterations && k < params.max_iter {
        k += 1;
        let advanced: Result<()> = match tracks.as_mut_slice() {
            [one] => one.advance(),
            [even, odd] => {
                let (a, b) = rayon::join(|| even.advance(), || odd.advance());
                a.and(b)
            }
            _ => unreachable!("one or two tracks"),
        };
        if let Err(e) = advanced {
            status = RunStatus::SolverFailure {
                k,
                message: e.to_string(),
            };
            break;
        }
        let state = combined(&tracks);
        let rec = measure(grid, &reference, &state, records.last())?;
        if tracks.len() > 1 {
            for t in tracks.iter_mut() {
                let r = measure(grid, &t.reference, &t.state, t.records.last())?;
                t.records.push(r);
            }
        }
        records.push(rec);

        let e1 = records[1].l2_error;
        if !rec.l2_error.is_finite() || (k >= 2 && rec.l2_error > params.divergence_factor * e1) {
            status = RunStatus::Diverged(k);
        } else if rec.l2_error <= params.tol * initial_error {
            status = RunStatus::Converged(k);
        }
    }

    let state = combined(&tracks);
    let components = if tracks.len() > 1 {
        tracks
            .iter()
            .map(|t| RunHistory {
                method: match t.scheme {
                    Scheme::Standard => MethodKind::Standard,
                    Scheme::Mixed => MethodKind::Mixed,
                },
                theta,
                records: t.records.clone(),
                status: status.clone(),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(RunOutcome {
        history: RunHistory {
            method: params.method,
            theta,
            records,
            status,
        },
        state,
        reference,
        components,
    })
}
