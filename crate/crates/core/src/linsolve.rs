//! Compressed sparse row storage and a profile (envelope) LDL^T factorization.
//!
//! Every system assembled in this crate is a symmetrized five-point Laplacian
//! in natural lattice ordering, so the envelope of row `i` is bounded by one
//! lattice row and the profile factorization is both simple and fast. Systems
//! whose envelope would exceed [`MAX_ENVELOPE`] fall back to conjugate gradients.

use crate::error::{Error, Result};

/// Relative pivot threshold: pivots below `PIVOT_TOL * max|A|` are singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// Relative residual target for the conjugate-gradient fallback.
pub const CG_TOL: f64 = 1e-12;

/// Largest number of stored envelope entries before switching to CG.
pub const MAX_ENVELOPE: usize = 60_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Assemble from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            let (expected, found) = if r >= rows { (rows, r) } else { (cols, c) };
            return Err(Error::DimensionMismatch { expected, found });
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
            .expect("diagonal indices are in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(col, value)` pairs of one row, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect())
    }

    fn check_symmetric(&self) -> Result<()> {
        let tol = PIVOT_TOL * self.max_abs();
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                if (self.get(c, r) - v).abs() > tol {
                    return Err(Error::NotSymmetric { row: r, col: c });
                }
            }
        }
        Ok(())
    }
}

/// Reusable solver for one fixed matrix.
#[derive(Debug, Clone)]
pub struct Factorization {
    matrix: SparseMatrix,
    kind: FactorKind,
}

#[derive(Debug, Clone)]
enum FactorKind {
    Envelope(EnvelopeLdl),
    ConjugateGradient,
}

#[derive(Debug, Clone)]
struct EnvelopeLdl {
    /// First stored column of each row of L.
    first: Vec<usize>,
    /// Offset of row `i`'s strictly-lower entries in `lower`.
    start: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl EnvelopeLdl {
    fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.rows;
        let threshold = PIVOT_TOL * a.max_abs();
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(i).next().map_or(i, |(c, _)| c.min(i)))
            .collect();
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        let mut lower = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];

        for i in 0..n {
            let fi = first[i];
            let (done, row_i) = lower.split_at_mut(start[i]);
            let row_i = &mut row_i[..i - fi];
            for (c, v) in a.row(i) {
                if c < i {
                    row_i[c - fi] = v;
                }
            }
            // t_ij = a_ij - sum_k t_ik l_jk, stored in place, then scaled by 1/d_j.
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &done[start[j]..start[j] + (j - fj)];
                let mut s = 0.0;
                for k in k0..j {
                    s += row_i[k - fi] * row_j[k - fj];
                }
                row_i[j - fi] -= s;
            }
            let mut d = a.get(i, i);
            for j in fi..i {
                let t = row_i[j - fi];
                let l = t / diag[j];
                d -= t * l;
                row_i[j - fi] = l;
            }
            if d.is_nan() || d.abs() <= threshold {
                return Err(Error::Singular {
                    row: i,
                    pivot: d,
                    threshold,
                });
            }
            diag[i] = d;
        }
        Ok(Self {
            first,
            start,
            lower,
            diag,
        })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let s: f64 = row.iter().zip(&x[fi..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for (v, d) in x.iter_mut().zip(&self.diag) {
            *v /= d;
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = x[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            for (l, v) in row.iter().zip(&mut x[fi..i]) {
                *v -= l * xi;
            }
        }
    }

    fn envelope_size(a: &SparseMatrix) -> usize {
        (0..a.rows)
            .map(|i| a.row(i).next().map_or(0, |(c, _)| i.saturating_sub(c)))
            .sum()
    }
}

/// Factorize a symmetric matrix for repeated solves.
pub fn factorize(a: &SparseMatrix) -> Result<Factorization> {
    if a.rows != a.cols {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    a.check_symmetric()?;
    let kind = if EnvelopeLdl::envelope_size(a) <= MAX_ENVELOPE {
        FactorKind::Envelope(EnvelopeLdl::factor(a)?)
    } else {
        FactorKind::ConjugateGradient
    };
    Ok(Factorization {
        matrix: a.clone(),
        kind,
    })
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.kind, FactorKind::Envelope(_))
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: b.len(),
            });
        }
        match &self.kind {
            FactorKind::Envelope(ldl) => {
                let mut x = b.to_vec();
                ldl.solve_in_place(&mut x);
                // one step of iterative refinement
                let ax = self.matrix.mul_vec(&x)?;
                let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
                ldl.solve_in_place(&mut r);
                for (xi, ri) in x.iter_mut().zip(&r) {
                    *xi += ri;
                }
                Ok(x)
            }
            FactorKind::ConjugateGradient => {
                conjugate_gradient(&self.matrix, b, CG_TOL, 10 * self.dim())
            }
        }
    }
}

/// Unpreconditioned CG for symmetric positive definite `a`.
pub fn conjugate_gradient(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.rows;
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * b_norm {
            return Ok(x);
        }
        let ap = a.mul_vec(&p)?;
        let alpha = rr / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_new;
    }
    if rr.sqrt() <= tol * b_norm {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual: rr.sqrt() / b_norm,
        })
    }
}
