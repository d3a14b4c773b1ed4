//! The birth-death chain that drives the forcing.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{LatticeIndexing, Params};

/// Up-jump probability at lattice index `i`.
#[inline]
pub fn alpha_at(i: i32, params: &Params) -> f64 {
    let n = params.n();
    if i >= n {
        0.0
    } else if i <= -n {
        1.0
    } else {
        0.5 * (1.0 - params.eta(i) * params.delta / 2.0)
    }
}

/// Up-jump probability at a lattice value `eta`.
pub fn alpha(eta: f64, params: &Params) -> Result<f64> {
    Ok(alpha_at(lattice_index(eta, params)?, params))
}

/// Index of a lattice value, rejecting points off the lattice.
pub fn lattice_index(eta: f64, params: &Params) -> Result<i32> {
    let x = eta / params.delta;
    let i = x.round();
    let err = || Error::OffLattice {
        eta,
        delta: params.delta,
        eta_max: params.eta_max(),
    };
    if !x.is_finite() || (x - i).abs() > 1e-9 * x.abs().max(1.0) {
        return Err(err());
    }
    let i = i as i32;
    if i.abs() > params.n() {
        return Err(err());
    }
    Ok(i)
}

/// Tridiagonal generator of the forcing chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainGenerator {
    pub lattice: LatticeIndexing,
    /// Total jump rate.
    pub rate: f64,
    /// `lower[k]` is the rate from offset `k` to `k - 1`.
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    /// `upper[k]` is the rate from offset `k` to `k + 1`.
    pub upper: Vec<f64>,
}

impl ChainGenerator {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// `(Q phi)(eta_i)` for every lattice point.
    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let m = self.size();
        assert_eq!(phi.len(), m);
        (0..m)
            .map(|k| {
                let mut acc = self.diag[k] * phi[k];
                if k > 0 {
                    acc += self.lower[k] * phi[k - 1];
                }
                if k + 1 < m {
                    acc += self.upper[k] * phi[k + 1];
                }
                acc
            })
            .collect()
    }

    /// `(g^T Q)` for a row vector `g`.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let m = self.size();
        assert_eq!(g.len(), m);
        (0..m)
            .map(|k| {
                let mut acc = self.diag[k] * g[k];
                if k > 0 {
                    acc += self.upper[k - 1] * g[k - 1];
                }
                if k + 1 < m {
                    acc += self.lower[k + 1] * g[k + 1];
                }
                acc
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let m = self.size();
        let mut out = vec![vec![0.0; m]; m];
        for k in 0..m {
            out[k][k] = self.diag[k];
            if k > 0 {
                out[k][k - 1] = self.lower[k];
            }
            if k + 1 < m {
                out[k][k + 1] = self.upper[k];
            }
        }
        out
    }
}

pub fn chain_generator(params: &Params) -> ChainGenerator {
    let lattice = params.lattice();
    let rate = params.jump_rate();
    let m = lattice.len();
    let mut lower = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let diag = vec![-rate; m];
    for i in lattice.indices() {
        let k = lattice.offset(i);
        let a = alpha_at(i, params);
        upper[k] = rate * a;
        lower[k] = rate * (1.0 - a);
    }
    ChainGenerator {
        lattice,
        rate,
        lower,
        diag,
        upper,
    }
}

/// Stationary law of the forcing chain, indexed by offset.
///
/// Detailed balance gives `g(i + 1) / g(i) = alpha(i) / (1 - alpha(i + 1))`;
/// the products are accumulated as logarithms.
pub fn invariant_measure(params: &Params) -> Vec<f64> {
    let lattice = params.lattice();
    let m = lattice.len();
    let mut log_g = vec![0.0; m];
    for i in -lattice.n..lattice.n {
        let k = lattice.offset(i);
        log_g[k + 1] = log_g[k] + alpha_at(i, params).ln() - (1.0 - alpha_at(i + 1, params)).ln();
    }
    let top = log_g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut g: Vec<f64> = log_g.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= total);
    g
}

/// Expectation of `f(eta)` under the invariant measure.
pub fn invariant_expectation(params: &Params, f: impl Fn(f64) -> f64) -> f64 {
    let g = invariant_measure(params);
    let lattice = params.lattice();
    lattice
        .indices()
        .map(|i| g[lattice.offset(i)] * f(params.eta(i)))
        .sum()
}

/// Draws the index after one jump from `i`.
#[inline]
pub fn sample_jump<R: Rng + ?Sized>(i: i32, params: &Params, rng: &mut R) -> i32 {
    if rng.random::<f64>() < alpha_at(i, params) {
        i + 1
    } else {
        i - 1
    }
}
