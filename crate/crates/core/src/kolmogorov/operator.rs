//! Upwind finite-difference generator on the grid.

use crate::error::{Error, Result};
use crate::model::{drift, Mode};
use crate::noise_chain::alpha_at;

use super::banded::{band_bytes, BandMatrix, Scalar};
use super::grid::Grid;

/// Generator `M` stored by neighbour direction: `east[r]` is the rate from
/// node `r` to the node with the next forcing value, `north[r]` the rate to
/// the next velocity value, and so on. `center[r]` is minus the row sum.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub grid: Grid,
    pub center: Vec<f64>,
    pub east: Vec<f64>,
    pub west: Vec<f64>,
    pub north: Vec<f64>,
    pub south: Vec<f64>,
}

/// Default ceiling on the bytes a single factorization may use.
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

/// Bytes needed to factor a shifted generator on `grid` with entries of
/// `elem_bytes` bytes, plus a handful of work vectors.
pub fn factor_bytes(grid: &Grid, elem_bytes: usize) -> u64 {
    band_bytes(grid.len(), grid.n_eta(), elem_bytes) + 16 * grid.len() as u64 * elem_bytes as u64
}

/// Refuses grids whose factorization would not fit in `budget` bytes.
pub fn check_memory(grid: &Grid, elem_bytes: usize, budget: u64) -> Result<()> {
    let bytes = factor_bytes(grid, elem_bytes);
    if bytes > budget {
        return Err(Error::MemoryBudget { nodes: grid.len(), bytes, budget });
    }
    Ok(())
}

impl OperatorMatrix {
    fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self {
            grid,
            center: vec![0.0; n],
            east: vec![0.0; n],
            west: vec![0.0; n],
            north: vec![0.0; n],
            south: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    /// Off-diagonal entries of row `r` as `(column, value)`.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let ne = self.grid.n_eta();
        [
            (r.wrapping_add(1), self.east[r]),
            (r.wrapping_sub(1), self.west[r]),
            (r.wrapping_add(ne), self.north[r]),
            (r.wrapping_sub(ne), self.south[r]),
        ]
        .into_iter()
        .filter(|&(_, x)| x != 0.0)
    }

    pub fn nnz(&self) -> usize {
        (0..self.len())
            .map(|r| self.row_entries(r).count() + usize::from(self.center[r] != 0.0))
            .sum()
    }

    /// `M u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|r| self.row_entries(r).fold(self.center[r] * u[r], |acc, (c, x)| acc + x * u[c]))
            .collect()
    }

    /// `M^T y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.center.iter().zip(y).map(|(c, x)| c * x).collect();
        for r in 0..self.len() {
            for (c, x) in self.row_entries(r) {
                out[c] += x * y[r];
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.len())
            .map(|r| self.row_entries(r).fold(self.center[r], |acc, (_, x)| acc + x))
            .collect()
    }

    /// Dense copy, for small grids only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut out = vec![vec![0.0; n]; n];
        for r in 0..n {
            out[r][r] = self.center[r];
            for (c, x) in self.row_entries(r) {
                out[r][c] = x;
            }
        }
        out
    }

    /// `shift I - M` as a band matrix, with the rows listed in `identity_rows`
    /// replaced by rows of the identity.
    pub fn shifted_band<T: Scalar>(&self, shift: T, identity_rows: &[usize]) -> BandMatrix<T> {
        let n = self.len();
        let mut a = BandMatrix::zeros(n, self.grid.n_eta());
        for r in 0..n {
            a.set(r, r, shift - T::from(self.center[r]));
            for (c, x) in self.row_entries(r) {
                a.set(r, c, T::from(-x));
            }
        }
        for &r in identity_rows {
            a.set_identity_row(r);
        }
        a
    }
}

/// Assembles the upwind generator on the grid of refinement `p`.
///
/// * rows with `v != 0`: transport plus forcing jumps, with the mode given by
///   the sign of `v`;
/// * `v = 0`, `|eta| > mu_s`: transport only, with the mode of the marker;
/// * `v = 0`, `|eta| <= mu_s`: forcing jumps only (static phase).
pub fn assemble(grid: &Grid) -> OperatorMatrix {
    let mut m = OperatorMatrix::zeros(*grid);
    let params = grid.params;
    let rate = params.jump_rate();
    let inv_dv = 1.0 / grid.dv();
    let (n, jmax) = (grid.lattice.n, grid.jmax());
    let alpha: Vec<f64> = grid.lattice.indices().map(|i| alpha_at(i, &params)).collect();
    for j in -jmax..=jmax {
        let v = grid.v(j);
        for i in -n..=n {
            let r = grid.node(i, j);
            let mode = grid.mode(i, j);
            let jumps = j != 0 || mode == Mode::Static;
            let transport = mode != Mode::Static;
            if jumps {
                let a = alpha[(i + n) as usize];
                if i < n {
                    m.east[r] = rate * a;
                }
                if i > -n {
                    m.west[r] = rate * (1.0 - a);
                }
            }
            if transport {
                let b = drift(grid.eta(i), mode, v, params.mu_d);
                if b > 0.0 {
                    debug_assert!(j < jmax);
                    m.north[r] = b * inv_dv;
                } else if b < 0.0 {
                    debug_assert!(j > -jmax);
                    m.south[r] = -b * inv_dv;
                }
            }
            m.center[r] = -(m.east[r] + m.west[r] + m.north[r] + m.south[r]);
        }
    }
    m
}

/// Which absorbing exit a modified row leaks into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Plus,
    Minus,
}

/// Generator of the process killed when the static phase ends.
///
/// The outward jumps from the two edge static nodes are removed from `op`
/// and recorded in `exits`: they lead to absorbing states whose values enter
/// the right-hand sides.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedOperator {
    pub op: OperatorMatrix,
    /// `(row, rate, exit)` for the two redirected jumps.
    pub exits: [(usize, f64, Exit); 2],
}

pub fn modified_assemble(grid: &Grid) -> ModifiedOperator {
    let mut op = assemble(grid);
    let k = grid.lattice.k_mu_s;
    let plus = grid.node(k, 0);
    let minus = grid.node(-k, 0);
    let rate_plus = op.east[plus];
    let rate_minus = op.west[minus];
    op.east[plus] = 0.0;
    op.west[minus] = 0.0;
    ModifiedOperator {
        op,
        exits: [(plus, rate_plus, Exit::Plus), (minus, rate_minus, Exit::Minus)],
    }
}

impl ModifiedOperator {
    /// Right-hand side contribution of absorbing values `(plus, minus)`.
    pub fn boundary_rhs(&self, plus: f64, minus: f64) -> Vec<f64> {
        let mut b = vec![0.0; self.op.len()];
        for &(row, rate, exit) in &self.exits {
            b[row] += rate * if exit == Exit::Plus { plus } else { minus };
        }
        b
    }
}
