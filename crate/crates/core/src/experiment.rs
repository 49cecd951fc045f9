//! The two benchmark problems and the experiment driver.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::fd::assemble_global;
use crate::grid::{Grid, NodeIndex};
use crate::io::{read_field_csv_on, write_field_csv, write_history_csv};
use crate::nnm::{errors, run, MethodKind, RunOutcome, RunParams, RunStatus};
use crate::symmetry::GlobalField;

/// Constant source `f = 1`, homogeneous boundary data.
pub fn build_example1(grid: &Grid) -> (GlobalField, GlobalField) {
    (
        GlobalField::from_fn(grid, |_, _| 1.0),
        GlobalField::zeros(grid),
    )
}

/// Odd source `f = x + y + s` with `s = sin(2φ)` on subdomain 1, `-sin(2φ)` on
/// subdomain 3 and zero elsewhere (including the axes); homogeneous boundary data.
pub fn build_example2(grid: &Grid) -> (GlobalField, GlobalField) {
    let f = GlobalField::from_node_fn(grid, |p| {
        let (x, y) = grid.coords(p);
        x + y + angular_source(p)
    });
    (f, GlobalField::zeros(grid))
}

/// `sin(2φ) = 2ij / (i^2 + j^2)` evaluated on lattice indices, signed per quadrant.
fn angular_source(p: NodeIndex) -> f64 {
    let (i, j) = (p.i as f64, p.j as f64);
    let s = 2.0 * i * j / (i * i + j * j);
    match (p.i.signum(), p.j.signum()) {
        (-1, -1) => s,
        (1, 1) => -s,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Example {
    One,
    Two,
    /// Source and boundary data read from field CSV files; a missing
    /// boundary file means `g = 0`.
    Custom {
        f_file: PathBuf,
        g_file: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: MethodKind,
    pub example: Example,
    pub theta: f64,
    pub n: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub output_dir: PathBuf,
    pub emit_fields: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidGridSize(self.n));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "theta must be finite, got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// `(f, g)` for the configured example.
pub fn build_data(config: &RunConfig, grid: &Grid) -> Result<(GlobalField, GlobalField)> {
    match &config.example {
        Example::One => Ok(build_example1(grid)),
        Example::Two => Ok(build_example2(grid)),
        Example::Custom { f_file, g_file } => {
            let f = read_field_csv_on(f_file, grid)?;
            let g = match g_file {
                Some(path) => read_field_csv_on(path, grid)?,
                None => GlobalField::zeros(grid),
            };
            Ok((f, g))
        }
    }
}

/// Process exit code for a finished run.
pub fn exit_code(status: &RunStatus) -> i32 {
    match status {
        RunStatus::Converged(_) => 0,
        RunStatus::MaxIterations => 2,
        RunStatus::Diverged(_) => 3,
        RunStatus::SolverFailure { .. } => 1,
    }
}

/// Run one configuration, write `history.csv` (and field snapshots when asked)
/// into the output directory and print a short summary to `log`.
pub fn run_experiment(config: &RunConfig, log: &mut dyn Write) -> Result<RunOutcome> {
    config.validate()?;
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let grid = Grid::new(config.n)?;
    let (f, g) = build_data(config, &grid)?;
    let theta = config.theta;
    let predicted = (1.0 - 4.0 * theta).abs();
    let say = |log: &mut dyn Write, msg: String| {
        writeln!(log, "{msg}").map_err(|e| Error::Io {
            path: PathBuf::from("<log>"),
            source: e,
        })
    };
    if !(theta > 0.0 && theta < 0.5) {
        say(
            log,
            format!(
                "warning: theta = {theta} lies outside (0, 1/2); convergence is not guaranteed"
            ),
        )?;
    }

    let params = RunParams {
        max_iter: config.max_iter,
        tol: config.tol,
        ..RunParams::new(config.method, theta)
    };
    let outcome = run(&grid, &f, &g, &params)?;
    write_history_csv(&out.join("history.csv"), &outcome.history)?;
    if config.emit_fields {
        let u = assemble_global(&grid, &outcome.state.u)?;
        let e = assemble_global(&grid, &errors(&outcome.reference, &outcome.state.u))?;
        let psi = assemble_global(&grid, &outcome.state.psi)?;
        write_field_csv(&out.join("solution.csv"), &grid, &u)?;
        write_field_csv(&out.join("error.csv"), &grid, &e)?;
        write_field_csv(&out.join("psi.csv"), &grid, &psi)?;
        write_field_csv(&out.join("reference.csv"), &grid, &outcome.reference)?;
    }

    let h = &outcome.history;
    say(
        log,
        format!(
            "method {}, theta {theta}, n {}: {}",
            config.method, config.n, h.status
        ),
    )?;
    if let Some(last) = h.records.last() {
        say(
            log,
            format!(
                "final l2 error {:.6e} at iteration {}",
                last.l2_error, last.k
            ),
        )?;
    }
    match h.asymptotic_ratio() {
        Some(r) => say(
            log,
            format!("asymptotic ratio {r:.8} (|1-4 theta| = {predicted:.8})"),
        )?,
        None => say(
            log,
            format!("asymptotic ratio undefined (|1-4 theta| = {predicted:.8})"),
        )?,
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::{decompose_even_odd, symmetry_defect, Parity};

    fn at(grid: &Grid, field: &GlobalField, x: f64, y: f64) -> f64 {
        let n = grid.n() as f64;
        field[NodeIndex::new((x * n).round() as i32, (y * n).round() as i32)]
    }

    #[test]
    fn example1_values() {
        let grid = Grid::new(10).unwrap();
        let (f, g) = build_example1(&grid);
        assert_eq!(at(&grid, &f, 0.3, -0.7), 1.0);
        assert_eq!(g.max_abs(), 0.0);
        assert_eq!(symmetry_defect(&f, Parity::Even), 0.0);
        let (e, o) = decompose_even_odd(&f);
        assert_eq!(e, f);
        assert_eq!(o.max_abs(), 0.0);
    }

    #[test]
    fn example2_values() {
        let grid = Grid::new(10).unwrap();
        let (f, g) = build_example2(&grid);
        assert!(at(&grid, &f, -0.5, -0.5).abs() < 1e-15);
        assert!(at(&grid, &f, 0.5, 0.5).abs() < 1e-15);
        assert_eq!(g.max_abs(), 0.0);
        assert_eq!(symmetry_defect(&f, Parity::Odd), 0.0);
        // Off the support of the angular term f is just x + y.
        assert!((at(&grid, &f, 0.5, -0.3) - 0.2).abs() < 1e-15);
        assert_eq!(at(&grid, &f, 0.0, 0.0), 0.0);
        assert!((at(&grid, &f, 0.0, -0.4) + 0.4).abs() < 1e-15);
    }

    #[test]
    fn angular_term_matches_atan2() {
        let grid = Grid::new(8).unwrap();
        for p in grid.subdomain_nodes(crate::grid::SubdomainId::One) {
            if p.i == 0 || p.j == 0 {
                continue;
            }
            let (x, y) = grid.coords(p);
            let phi = y.atan2(x);
            assert!((angular_source(p) - (2.0 * phi).sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&RunStatus::Converged(2)), 0);
        assert_eq!(exit_code(&RunStatus::MaxIterations), 2);
        assert_eq!(exit_code(&RunStatus::Diverged(7)), 3);
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig {
            method: MethodKind::New,
            example: Example::One,
            theta: 0.25,
            n: 4,
            max_iter: 5,
            tol: 1e-10,
            output_dir: PathBuf::from("."),
            emit_fields: false,
        };
        assert!(c.validate().is_ok());
        c.n = 1;
        assert!(c.validate().is_err());
        c.n = 4;
        c.max_iter = 0;
        assert!(c.validate().is_err());
        c.max_iter = 5;
        c.tol = 0.0;
        assert!(c.validate().is_err());
    }
}
