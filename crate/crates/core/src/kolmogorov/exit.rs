//! Problems stopped at the end of the static phase: exit probabilities,
//! discounted occupation times, the representation of the resolvent through
//! them, and the mean-exit-time route to the stick probability.

use crate::error::{Error, Result};
use crate::model::Params;
use crate::noise_chain::alpha_at;

use super::banded::BandMatrix;
use super::grid::Grid;
use super::operator::{ModifiedOperator, OperatorMatrix};
use super::solve::{SolveReport, System};

/// Factored `lambda I - M'` for the killed process.
pub struct AbsorbingSolver<'a> {
    mop: &'a ModifiedOperator,
    lambda: f64,
    sys: System<'a, f64>,
}

impl<'a> AbsorbingSolver<'a> {
    pub fn new(mop: &'a ModifiedOperator, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("need lambda >= 0, got {lambda}")));
        }
        Ok(Self { mop, lambda, sys: System::new(&mop.op, lambda, &[])? })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `E[exp(-lambda tau1); exit at s+]`.
    pub fn h_plus(&self) -> Result<Vec<f64>> {
        self.sys.solve(&self.mop.boundary_rhs(1.0, 0.0))
    }

    pub fn h_minus(&self) -> Result<Vec<f64>> {
        self.sys.solve(&self.mop.boundary_rhs(0.0, 1.0))
    }

    /// `E[int_0^tau1 exp(-lambda s) f ds]`.
    pub fn w(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.sys.solve(f)
    }

    pub fn report(&self) -> SolveReport {
        self.sys.report()
    }
}

/// Exit-weighted Laplace functionals of the killed process.
#[derive(Debug, Clone, PartialEq)]
pub struct HW {
    pub h_plus: Vec<f64>,
    pub h_minus: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn solve_h_w(mop: &ModifiedOperator, lambda: f64, f: &[f64]) -> Result<HW> {
    let s = AbsorbingSolver::new(mop, lambda)?;
    Ok(HW { h_plus: s.h_plus()?, h_minus: s.h_minus()?, w: s.w(f)? })
}

/// `(w(s+; f) + w(s-; f)) / (2 w(s+; 1))`.
pub fn pi_lambda(grid: &Grid, w_f: &[f64], w_one: &[f64]) -> f64 {
    (w_f[grid.s_plus()] + w_f[grid.s_minus()]) / (2.0 * w_one[grid.s_plus()])
}

/// `(w(s+; f) - w(s-; f)) / (2 (1 - h+(s+) + h-(s+)))`.
pub fn mu_lambda(grid: &Grid, w_f: &[f64], h_plus: &[f64], h_minus: &[f64]) -> f64 {
    let s = grid.s_plus();
    (w_f[s] - w_f[grid.s_minus()]) / (2.0 * (1.0 - h_plus[s] + h_minus[s]))
}

/// Resolvent `u_lambda(f)` rebuilt from the killed-process functionals.
pub fn representation_u_lambda(
    grid: &Grid,
    h_plus: &[f64],
    h_minus: &[f64],
    w_f: &[f64],
    w_one: &[f64],
    lambda: f64,
) -> Vec<f64> {
    let pi = pi_lambda(grid, w_f, w_one);
    let mu = mu_lambda(grid, w_f, h_plus, h_minus);
    (0..grid.len())
        .map(|r| w_f[r] - pi * w_one[r] + mu * (h_plus[r] - h_minus[r]) + pi / lambda)
        .collect()
}

/// Stationary average `pi(f)` from cycle occupation times.
pub fn stationary_from_excursions(mop: &ModifiedOperator, f: &[f64]) -> Result<f64> {
    let s = AbsorbingSolver::new(mop, 0.0)?;
    let grid = &mop.op.grid;
    Ok(pi_lambda(grid, &s.w(f)?, &s.w(&vec![1.0; grid.len()])?))
}

/// Solves `(shift - Q) F = g` on the static strip `|i| <= k` with
/// `F(+-(k + 1)) = boundary`.
pub fn strip_solve(params: &Params, shift: f64, g: impl Fn(i32) -> f64, boundary: f64) -> Result<Vec<f64>> {
    let k = params.lattice().k_mu_s;
    let m = (2 * k + 1) as usize;
    let rate = params.jump_rate();
    let mut a = BandMatrix::<f64>::zeros(m, 1);
    let mut b = vec![0.0; m];
    for i in -k..=k {
        let r = (i + k) as usize;
        let up = rate * alpha_at(i, params);
        let down = rate - up;
        a.set(r, r, shift + rate);
        b[r] = g(i);
        if i < k {
            a.set(r, r + 1, -up);
        } else {
            b[r] += up * boundary;
        }
        if i > -k {
            a.set(r, r - 1, -down);
        } else {
            b[r] += down * boundary;
        }
    }
    let lu = a.factor()?;
    lu.solve_in_place(&mut b);
    Ok(b)
}

/// Mean time to leave the static strip from each `|i| <= k`.
pub fn strip_exit_time(params: &Params) -> Result<Vec<f64>> {
    strip_solve(params, 0.0, |_| 1.0, 0.0)
}

/// Mean-exit-time pieces of the stick probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PStick {
    /// Mean sliding time from `s+`.
    pub w_hat: f64,
    /// Mean time from `s+` to the first edge static node.
    pub w_check: f64,
    /// Strip exit times, indexed by `i + k`.
    pub w_strip: Vec<f64>,
    pub p_stick: f64,
}

impl PStick {
    /// `E[tau1]` from `s+`.
    pub fn mean_cycle(&self) -> f64 {
        self.w_check + self.w_strip[self.w_strip.len() - 1]
    }

    pub fn mean_stick(&self) -> f64 {
        self.mean_cycle() - self.w_hat
    }
}

pub fn p_stick_systems(m: &OperatorMatrix) -> Result<PStick> {
    let grid = &m.grid;
    let n = grid.len();
    let k = grid.lattice.k_mu_s;
    let static_nodes = grid.static_nodes();
    let mut b = vec![1.0; n];
    static_nodes.iter().for_each(|&r| b[r] = 0.0);
    let w_hat = System::new(m, 0.0, &static_nodes)?.solve(&b)?[grid.s_plus()];
    let edges = [grid.node(-k, 0), grid.node(k, 0)];
    let mut b = vec![1.0; n];
    edges.iter().for_each(|&r| b[r] = 0.0);
    let w_check = System::new(m, 0.0, &edges)?.solve(&b)?[grid.s_plus()];
    let w_strip = strip_exit_time(&grid.params)?;
    let total = w_check + w_strip[(2 * k) as usize];
    Ok(PStick { w_hat, w_check, w_strip, p_stick: 1.0 - w_hat / total })
}
