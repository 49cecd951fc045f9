//! Nodal fields on the whole lattice and their even/odd split under
//! the point reflection `(x, y) -> (-x, -y)`.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::grid::{Grid, NodeIndex, Reflection};

/// Nodal values on every lattice node, stored row-major (x fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalField {
    grid: Grid,
    values: Vec<f64>,
}

impl GlobalField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.num_nodes()],
        }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = grid
            .nodes()
            .map(|p| {
                let (x, y) = grid.coords(p);
                f(x, y)
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_node_fn(grid: &Grid, f: impl FnMut(NodeIndex) -> f64) -> Self {
        Self {
            grid: grid.clone(),
            values: grid.nodes().map(f).collect(),
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_nodes(),
                found: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn check_same_grid(&self, other: &GlobalField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.grid.n(),
                right: other.grid.n(),
            })
        }
    }

    /// Copy with every value outside the outer boundary set to zero.
    pub fn boundary_only(&self) -> GlobalField {
        let grid = &self.grid;
        GlobalField::from_node_fn(grid, |p| {
            if grid.is_outer_boundary(p) {
                self[p]
            } else {
                0.0
            }
        })
    }

    pub fn scaled(&self, alpha: f64) -> GlobalField {
        GlobalField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<NodeIndex> for GlobalField {
    type Output = f64;

    fn index(&self, p: NodeIndex) -> &f64 {
        &self.values[self.grid.linear(p)]
    }
}

impl IndexMut<NodeIndex> for GlobalField {
    fn index_mut(&mut self, p: NodeIndex) -> &mut f64 {
        let k = self.grid.linear(p);
        &mut self.values[k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Split `field` into its even and odd parts.
///
/// `even(p) = (field(p) + field(-p)) / 2`, `odd(p) = (field(p) - field(-p)) / 2`.
/// Both parts are exactly (anti)symmetric because the reflection is an index
/// permutation and IEEE addition is commutative.
pub fn decompose_even_odd(field: &GlobalField) -> (GlobalField, GlobalField) {
    let grid = field.grid();
    let mirror = |p: NodeIndex| field[grid.reflect(p, Reflection::XY)];
    let even = GlobalField::from_node_fn(grid, |p| 0.5 * (field[p] + mirror(p)));
    let odd = GlobalField::from_node_fn(grid, |p| 0.5 * (field[p] - mirror(p)));
    (even, odd)
}

pub fn recompose(even: &GlobalField, odd: &GlobalField) -> Result<GlobalField> {
    even.check_same_grid(odd)?;
    let values = even
        .values
        .iter()
        .zip(&odd.values)
        .map(|(a, b)| a + b)
        .collect();
    Ok(GlobalField {
        grid: even.grid.clone(),
        values,
    })
}

/// `max_p |field(p) -/+ field(-p)|`; zero iff the field has the requested parity.
pub fn symmetry_defect(field: &GlobalField, parity: Parity) -> f64 {
    let grid = field.grid();
    grid.nodes()
        .map(|p| {
            let m = field[grid.reflect(p, Reflection::XY)];
            match parity {
                Parity::Even => (field[p] - m).abs(),
                Parity::Odd => (field[p] + m).abs(),
            }
        })
        .fold(0.0, f64::max)
}
