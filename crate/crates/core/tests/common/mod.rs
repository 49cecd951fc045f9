#![allow(dead_code)]

use nnm_core::fd::{extract_flux, solve_subdomain, SubField};
use nnm_core::nnm::{errors, init_state, step, IterState, Problem, Scheme};
use nnm_core::{
    CornerPolicy, EdgeBc, EdgeCondition, GlobalField, Grid, InterfaceId, Reflection, SubdomainId,
    Trace, TraceKind,
};

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let m = a[r][c] / a[c][c];
            let (top, bottom) = a.split_at_mut(r);
            for (x, y) in bottom[0][c..].iter_mut().zip(&top[c][c..]) {
                *x -= m * y;
            }
            b[r] -= m * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// `-Δu = 1` on the square with zero boundary data, value at the centre, from
/// the cosine series of `(1 - x^2)/2` corrected by hyperbolic terms.
pub fn poisson_unit_source_at_origin() -> f64 {
    let pi = std::f64::consts::PI;
    let mut u = 0.5;
    for m in 0..200 {
        let k = (2 * m + 1) as f64;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let a = 16.0 * sign / (k * k * k * pi * pi * pi);
        u -= a / (k * pi / 2.0).cosh();
    }
    u
}

pub fn max_diff(a: &SubField, b: &SubField) -> f64 {
    a.axpby(1.0, b, -1.0).max_abs()
}

/// Solve with Dirichlet data on both interface edges, extract both fluxes, solve
/// again with the fluxes as Neumann data (and, if `keep_first`, the first edge
/// still Dirichlet). Returns the largest nodal difference.
pub fn flux_round_trip(
    grid: &Grid,
    sub: SubdomainId,
    f: &GlobalField,
    g: &GlobalField,
    edge_values: [&dyn Fn(usize) -> f64; 2],
    keep_first: bool,
) -> f64 {
    let n = grid.n();
    let edges = sub.edges();
    let traces: Vec<Trace> = edges
        .iter()
        .zip(edge_values)
        .map(|(&e, value)| {
            // The outer endpoint is consistent with the boundary data.
            let values = (0..=n)
                .map(|t| if t == 0 { g[e.node(n, 0)] } else { value(t) })
                .collect();
            Trace::new(e, TraceKind::DirichletValue, values)
        })
        .collect();
    let bc = EdgeBc::new(
        n,
        sub,
        [
            EdgeCondition::Dirichlet(traces[0].clone()),
            EdgeCondition::Dirichlet(traces[1].clone()),
        ],
    )
    .unwrap();
    let policy = CornerPolicy::default();
    let u = solve_subdomain(grid, f, g, &bc, policy).unwrap();
    let flux = |e: InterfaceId| extract_flux(grid, &u, f, e).unwrap();
    let first = if keep_first {
        let values = (0..=n).map(|t| u[edges[0].node(n, t)]).collect();
        EdgeCondition::Dirichlet(Trace::new(edges[0], TraceKind::DirichletValue, values))
    } else {
        EdgeCondition::Neumann(flux(edges[0]))
    };
    let bc = EdgeBc::new(n, sub, [first, EdgeCondition::Neumann(flux(edges[1]))]).unwrap();
    let v = solve_subdomain(grid, f, g, &bc, policy).unwrap();
    max_diff(&u, &v)
}

/// Iterates `u^1, ..., u^k` of one scheme on one problem, with errors
/// `e^k = reference - u^k`.
pub struct Trajectory {
    pub states: Vec<IterState>,
    pub errors: Vec<[SubField; 4]>,
}

pub fn trajectory(grid: &Grid, f: GlobalField, scheme: Scheme, theta: f64, k: usize) -> Trajectory {
    let g = GlobalField::zeros(grid);
    let problem = Problem::new(grid, f, g.clone(), CornerPolicy::default()).unwrap();
    let reference = problem.reference().unwrap();
    let mut state = init_state(grid, &g, theta);
    let mut states = vec![state.clone()];
    let mut errs = vec![errors(&reference, &state.u)];
    for _ in 0..k {
        state = step(&problem, &state, scheme).unwrap();
        errs.push(errors(&reference, &state.u));
        states.push(state.clone());
    }
    Trajectory {
        states,
        errors: errs,
    }
}

/// `max |psi^k + 2 e^k|` over every subdomain.
pub fn correction_defect(t: &Trajectory, k: usize) -> f64 {
    SubdomainId::ALL
        .iter()
        .map(|s| {
            let i = s.index();
            t.states[k].psi[i]
                .axpby(1.0, &t.errors[k][i], 2.0)
                .max_abs()
        })
        .fold(0.0, f64::max)
}

/// `max |e_m(p) - s_m e_1(R_m p)|` for `m = 2, 3, 4` with reflections X, XY, Y.
pub fn reflection_defect(grid: &Grid, e: &[SubField; 4], signs: [f64; 3]) -> f64 {
    let pairs = [
        (SubdomainId::Two, Reflection::X),
        (SubdomainId::Three, Reflection::XY),
        (SubdomainId::Four, Reflection::Y),
    ];
    let e1 = &e[0];
    let mut worst: f64 = 0.0;
    for ((sub, r), s) in pairs.into_iter().zip(signs) {
        for (p, v) in e[sub.index()].iter() {
            worst = worst.max((v - s * e1[grid.reflect(p, r)]).abs());
        }
    }
    worst
}

/// `max_p |e^k(p) - (1 - 4θ) e^{k-1}(p)| / max_p |e^{k-1}(p)|`.
pub fn recurrence_defect(t: &Trajectory, k: usize, theta: f64) -> f64 {
    let q = 1.0 - 4.0 * theta;
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for i in 0..4 {
        num = num.max(t.errors[k][i].axpby(1.0, &t.errors[k - 1][i], -q).max_abs());
        den = den.max(t.errors[k - 1][i].max_abs());
    }
    num / den
}
