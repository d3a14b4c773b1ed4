//! Factored shifted systems `(shift I - M) u = b` with optional identity rows.

use std::cell::Cell;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

use super::banded::{BandLu, Scalar};
use super::operator::{check_memory, OperatorMatrix, DEFAULT_MEMORY_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub memory_budget: u64,
    /// Bound on `|b - A x|_inf / (|A|_inf |x|_inf + |b|_inf)`.
    pub tolerance: f64,
    pub max_refinements: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            memory_budget: DEFAULT_MEMORY_BUDGET,
            tolerance: 1e-10,
            max_refinements: 3,
        }
    }
}

/// Bookkeeping of one factorization and the solves that reused it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveReport {
    pub shift_re: f64,
    pub shift_im: f64,
    pub nodes: usize,
    pub bandwidth: usize,
    pub factor_bytes: u64,
    pub factorizations: usize,
    pub solves: usize,
    pub refinements: usize,
    pub max_residual: f64,
    pub factor_seconds: f64,
}

/// Complex conversion used for reports.
pub trait ShiftParts {
    fn parts(self) -> (f64, f64);
}

impl ShiftParts for f64 {
    fn parts(self) -> (f64, f64) {
        (self, 0.0)
    }
}

impl ShiftParts for Complex64 {
    fn parts(self) -> (f64, f64) {
        (self.re, self.im)
    }
}

/// `A = shift I - M` with some rows replaced by the identity, factored once.
pub struct System<'a, T: Scalar> {
    op: &'a OperatorMatrix,
    shift: T,
    identity: Vec<bool>,
    lu: BandLu<T>,
    options: SolverOptions,
    norm_a: f64,
    report: Cell<SolveReport>,
}

impl<'a, T: Scalar + ShiftParts> System<'a, T> {
    pub fn new(op: &'a OperatorMatrix, shift: T, identity_rows: &[usize]) -> Result<Self> {
        Self::with_options(op, shift, identity_rows, SolverOptions::default())
    }

    pub fn with_options(op: &'a OperatorMatrix, shift: T, identity_rows: &[usize], options: SolverOptions) -> Result<Self> {
        let elem = std::mem::size_of::<T>();
        check_memory(&op.grid, elem, options.memory_budget)?;
        let start = Instant::now();
        let band = op.shifted_band(shift, identity_rows);
        let lu = band.factor()?;
        let mut identity = vec![false; op.len()];
        identity_rows.iter().for_each(|&r| identity[r] = true);
        let norm_a = (0..op.len())
            .map(|r| {
                if identity[r] {
                    1.0
                } else {
                    (shift - T::from(op.center[r])).modulus() + op.row_entries(r).map(|(_, x)| x.abs()).sum::<f64>()
                }
            })
            .fold(0.0, f64::max);
        let (re, im) = shift.parts();
        let report = SolveReport {
            shift_re: re,
            shift_im: im,
            nodes: op.len(),
            bandwidth: lu.bandwidth(),
            factor_bytes: lu.bytes(),
            factorizations: 1,
            solves: 0,
            refinements: 0,
            max_residual: 0.0,
            factor_seconds: start.elapsed().as_secs_f64(),
        };
        Ok(Self { op, shift, identity, lu, options, norm_a, report: Cell::new(report) })
    }

    pub fn report(&self) -> SolveReport {
        self.report.get()
    }

    pub fn operator(&self) -> &OperatorMatrix {
        self.op
    }

    /// `A x`.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        (0..self.op.len())
            .map(|r| {
                if self.identity[r] {
                    return x[r];
                }
                let mut acc = (self.shift - T::from(self.op.center[r])) * x[r];
                for (c, a) in self.op.row_entries(r) {
                    acc -= T::from(a) * x[c];
                }
                acc
            })
            .collect()
    }

    /// `A^T y`.
    pub fn apply_transpose(&self, y: &[T]) -> Vec<T> {
        let n = self.op.len();
        let mut out = vec![T::zero(); n];
        for r in 0..n {
            if self.identity[r] {
                out[r] += y[r];
                continue;
            }
            out[r] += (self.shift - T::from(self.op.center[r])) * y[r];
            for (c, a) in self.op.row_entries(r) {
                out[c] -= T::from(a) * y[r];
            }
        }
        out
    }

    fn relative_residual(&self, b: &[T], x: &[T], ax: &[T]) -> (Vec<T>, f64) {
        let r: Vec<T> = b.iter().zip(ax).map(|(p, q)| *p - *q).collect();
        let rn = r.iter().map(|z| z.modulus()).fold(0.0, f64::max);
        let xn = x.iter().map(|z| z.modulus()).fold(0.0, f64::max);
        let bn = b.iter().map(|z| z.modulus()).fold(0.0, f64::max);
        let denom = self.norm_a * xn + bn;
        (r, if denom > 0.0 { rn / denom } else { 0.0 })
    }

    fn run(&self, b: &[T], transpose: bool) -> Result<Vec<T>> {
        if b.len() != self.op.len() {
            return Err(Error::LengthMismatch(b.len(), self.op.len()));
        }
        let solve = |v: &mut [T]| {
            if transpose {
                self.lu.solve_transpose_in_place(v)
            } else {
                self.lu.solve_in_place(v)
            }
        };
        let apply = |v: &[T]| if transpose { self.apply_transpose(v) } else { self.apply(v) };
        let mut x = b.to_vec();
        solve(&mut x);
        let mut rep = self.report.get();
        let (mut r, mut res) = self.relative_residual(b, &x, &apply(&x));
        let mut k = 0;
        while res > self.options.tolerance && k < self.options.max_refinements {
            solve(&mut r);
            x.iter_mut().zip(&r).for_each(|(a, d)| *a += *d);
            (r, res) = self.relative_residual(b, &x, &apply(&x));
            k += 1;
        }
        rep.solves += 1;
        rep.refinements += k;
        rep.max_residual = rep.max_residual.max(res);
        self.report.set(rep);
        if !res.is_finite() || res > self.options.tolerance {
            return Err(Error::Residual { residual: res, tolerance: self.options.tolerance });
        }
        Ok(x)
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        self.run(b, false)
    }

    pub fn solve_transpose(&self, b: &[T]) -> Result<Vec<T>> {
        self.run(b, true)
    }
}
