//! CSV files: nodal fields (`x,y,value`) and convergence histories.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::nnm::RunHistory;
use crate::symmetry::GlobalField;

/// Coordinates read back from a file may differ from the lattice by this much.
const COORD_TOL: f64 = 1e-9;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => Error::MalformedRow {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `field` row-major over the lattice (x fastest).
pub fn write_field_csv(path: &Path, grid: &Grid, field: &GlobalField) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let wrap = |e: csv::Error| csv_err(path, e);
    w.write_record(["x", "y", "value"]).map_err(wrap)?;
    for p in grid.nodes() {
        let (x, y) = grid.coords(p);
        w.write_record([format_value(x), format_value(y), format_value(field[p])])
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn read_rows(path: &Path) -> Result<Vec<(u64, [f64; 3])>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "y", "value"] {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected header `x,y,value`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let malformed = |message: String| Error::MalformedRow {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() != 3 {
            return Err(malformed(format!("expected 3 fields, found {}", rec.len())));
        }
        let mut vals = [0.0; 3];
        for (v, s) in vals.iter_mut().zip(rec.iter()) {
            *v = s
                .parse()
                .map_err(|_| malformed(format!("`{s}` is not a number")))?;
        }
        rows.push((line, vals));
    }
    Ok(rows)
}

/// Read a field written on `grid`; rows must follow the lattice order.
pub fn read_field_csv_on(path: &Path, grid: &Grid) -> Result<GlobalField> {
    let rows = read_rows(path)?;
    if rows.len() != grid.num_nodes() {
        return Err(Error::NodeCount {
            path: path.to_path_buf(),
            expected: grid.num_nodes(),
            found: rows.len(),
        });
    }
    let mut values = Vec::with_capacity(rows.len());
    for (p, (line, [x, y, v])) in grid.nodes().zip(rows) {
        let (px, py) = grid.coords(p);
        if (x - px).abs() > COORD_TOL || (y - py).abs() > COORD_TOL {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                message: format!("expected node ({px}, {py}), found ({x}, {y})"),
            });
        }
        values.push(v);
    }
    GlobalField::from_values(grid, values)
}

/// Read a field, inferring the grid from the number of rows.
pub fn read_field_csv(path: &Path) -> Result<GlobalField> {
    let count = read_rows(path)?.len();
    let side = (count as f64).sqrt().round() as usize;
    if side * side != count || side.is_multiple_of(2) || side < 5 {
        let nearest = side.max(5) | 1;
        return Err(Error::NodeCount {
            path: path.to_path_buf(),
            expected: nearest * nearest,
            found: count,
        });
    }
    read_field_csv_on(path, &Grid::new((side - 1) / 2)?)
}

pub const HISTORY_HEADER: [&str; 7] = [
    "iter",
    "l2_error",
    "broken_h1_error",
    "subdomain_sum_l2",
    "ratio",
    "psi_crosspoint_max",
    "status",
];

/// One row per iteration; the status column carries the final status on the
/// last row and `running` before it. The ratio column is empty where undefined.
pub fn write_history_csv(path: &Path, history: &RunHistory) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let wrap = |e: csv::Error| csv_err(path, e);
    w.write_record(HISTORY_HEADER).map_err(wrap)?;
    let last = history.records.len().saturating_sub(1);
    for (idx, r) in history.records.iter().enumerate() {
        let status = if idx == last {
            history.status.label()
        } else {
            "running"
        };
        w.write_record([
            r.k.to_string(),
            format_value(r.l2_error),
            format_value(r.broken_h1_error),
            format_value(r.subdomain_sum_l2),
            r.contraction_ratio.map(format_value).unwrap_or_default(),
            format_value(r.psi_crosspoint_max),
            status.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn constant_field_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let grid = Grid::new(3).unwrap();
        let f = GlobalField::from_fn(&grid, |_, _| 1.0);
        write_field_csv(&path, &grid, &f).unwrap();
        assert_eq!(read_field_csv_on(&path, &grid).unwrap(), f);
        assert_eq!(read_field_csv(&path).unwrap(), f);
    }

    #[test]
    fn tenth_round_trips_bit_exactly() {
        let s = format_value(0.1);
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), 0.1f64.to_bits());
    }

    #[test]
    fn wrong_count_names_both_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let grid = Grid::new(2).unwrap();
        write_field_csv(&path, &grid, &GlobalField::zeros(&grid)).unwrap();
        let err = read_field_csv_on(&path, &Grid::new(3).unwrap()).unwrap_err();
        assert!(matches!(
            err,
            Error::NodeCount {
                expected: 49,
                found: 25,
                ..
            }
        ));
        let msg = err.to_string();
        assert!(msg.contains("49") && msg.contains("25"), "{msg}");
    }

    #[test]
    fn bad_value_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let mut file = File::create(&path).unwrap();
        writeln!(file, "x,y,value\n0,0,1\n0,0,abc").unwrap();
        let err = read_rows(&path).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
    }

    #[test]
    fn misplaced_node_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let grid = Grid::new(2).unwrap();
        let mut file = File::create(&path).unwrap();
        writeln!(file, "x,y,value").unwrap();
        for p in grid.nodes() {
            let (x, y) = grid.coords(p);
            writeln!(file, "{},{},0", y, x).unwrap();
        }
        drop(file);
        let err = read_field_csv_on(&path, &grid).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_field_csv(Path::new("/nonexistent/f.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
