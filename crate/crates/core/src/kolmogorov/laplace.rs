//! Laplace transforms of the stick and slide durations and their behaviour
//! at large `lambda`, which gives the densities at `0+`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Params;
use crate::noise_chain::alpha_at;

use super::exit::{strip_solve, AbsorbingSolver};
use super::grid::Grid;
use super::operator::{assemble, modified_assemble, ModifiedOperator, OperatorMatrix};
use super::solve::System;

/// Distribution of the static node where sliding from `s+` ends.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicMeasure {
    pub k_mu_s: i32,
    /// Probability of entering the static phase at `i`, indexed by `i + k`.
    pub p_hat: Vec<f64>,
}

impl HarmonicMeasure {
    pub fn at(&self, i: i32) -> f64 {
        self.p_hat[(i + self.k_mu_s) as usize]
    }
}

/// One transposed solve gives every entry probability at once:
/// `P_k(s+) = (A^{-T} e_{s+})_k` for `A = -M` pinned on the static set.
pub fn harmonic_measure(m: &OperatorMatrix) -> Result<HarmonicMeasure> {
    let grid = &m.grid;
    let nodes = grid.static_nodes();
    let sys = System::new(m, 0.0, &nodes)?;
    let mut e = vec![0.0; grid.len()];
    e[grid.s_plus()] = 1.0;
    let y = sys.solve_transpose(&e)?;
    Ok(HarmonicMeasure {
        k_mu_s: grid.lattice.k_mu_s,
        p_hat: nodes.iter().map(|&r| y[r]).collect(),
    })
}

/// `E_i[exp(-lambda T)]` for the exit time `T` of the static strip.
pub fn strip_laplace(params: &Params, lambda: f64) -> Result<Vec<f64>> {
    strip_solve(params, lambda, |_| 0.0, 1.0)
}

pub fn laplace_stick_from(hm: &HarmonicMeasure, params: &Params, lambda: f64) -> Result<f64> {
    let f = strip_laplace(params, lambda)?;
    Ok(f.iter().zip(&hm.p_hat).map(|(a, b)| a * b).sum())
}

/// Laplace transform of the stick duration.
pub fn laplace_stick(params: &Params, p: u32, lambda: f64) -> Result<f64> {
    let grid = Grid::new(*params, p)?;
    laplace_stick_from(&harmonic_measure(&assemble(&grid))?, params, lambda)
}

/// Stick density at `0+`: only the edge static nodes can leave in one jump.
pub fn f_stick_at_zero(hm: &HarmonicMeasure, params: &Params) -> f64 {
    let k = hm.k_mu_s;
    let rate = params.jump_rate();
    rate * (alpha_at(k, params) * hm.at(k) + (1.0 - alpha_at(-k, params)) * hm.at(-k))
}

/// Laplace transform of the slide duration, computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceSlid {
    pub lambda: f64,
    /// From the problem pinned to 1 on the static set.
    pub via_g: f64,
    /// `1 - lambda w_lambda(s+; 1 off the static set)`.
    pub via_w: f64,
}

pub fn laplace_slid_with(m: &OperatorMatrix, mop: &ModifiedOperator, lambda: f64) -> Result<LaplaceSlid> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("need lambda > 0, got {lambda}")));
    }
    let grid = &m.grid;
    let nodes = grid.static_nodes();
    let mut b = vec![0.0; grid.len()];
    nodes.iter().for_each(|&r| b[r] = 1.0);
    let via_g = System::new(m, lambda, &nodes)?.solve(&b)?[grid.s_plus()];
    let dynamic: Vec<f64> = (0..grid.len()).map(|r| f64::from(u8::from(!grid.is_static(r)))).collect();
    let w = AbsorbingSolver::new(mop, lambda)?.w(&dynamic)?;
    Ok(LaplaceSlid { lambda, via_g, via_w: 1.0 - lambda * w[grid.s_plus()] })
}

pub fn laplace_slid(params: &Params, p: u32, lambda: f64) -> Result<LaplaceSlid> {
    let grid = Grid::new(*params, p)?;
    laplace_slid_with(&assemble(&grid), &modified_assemble(&grid), lambda)
}

/// Limit of `lambda F(lambda)` as `lambda -> infinity`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct F0Laplace {
    pub value: f64,
    /// Whether `lambda F(lambda)` is monotone over the last three grid points.
    pub monotone_tail: bool,
    /// `(lambda, lambda F(lambda))` on the grid.
    pub samples: Vec<(f64, f64)>,
}

/// Evaluates `lambda F(lambda)` on an increasing grid and extrapolates to
/// `1 / lambda = 0` with a quadratic through the last three points.
pub fn f0_from_laplace(mut f: impl FnMut(f64) -> Result<f64>, lambdas: &[f64]) -> Result<F0Laplace> {
    if lambdas.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: lambdas.len() });
    }
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) || !(lambdas[0] > 0.0) {
        return Err(Error::Domain("lambda grid must be positive and increasing".into()));
    }
    let samples = lambdas
        .iter()
        .map(|&l| Ok((l, l * f(l)?)))
        .collect::<Result<Vec<_>>>()?;
    let tail = &samples[samples.len() - 3..];
    let d1 = tail[1].1 - tail[0].1;
    let d2 = tail[2].1 - tail[1].1;
    let monotone_tail = d1 * d2 >= 0.0;
    let pts: Vec<(f64, f64)> = tail.iter().map(|&(l, y)| (1.0 / l, y)).collect();
    Ok(F0Laplace { value: neville_at_zero(&pts), monotone_tail, samples })
}

/// Value at 0 of the interpolating polynomial through `pts`.
fn neville_at_zero(pts: &[(f64, f64)]) -> f64 {
    let mut y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let n = y.len();
    for m in 1..n {
        for i in 0..n - m {
            y[i] = (x[i + m] * y[i] - x[i] * y[i + 1]) / (x[i + m] - x[i]);
        }
    }
    y[0]
}

/// `lambda = Lambda 2^m`, `m = 0..=10`, where `Lambda` is the forcing jump rate.
pub fn default_laplace_grid(params: &Params) -> Vec<f64> {
    let rate = params.jump_rate();
    (0..=10).map(|m| rate * 2f64.powi(m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kolmogorov::p_stick_systems;

    #[test]
    fn initial_value_limit_of_known_transforms() {
        let grid: Vec<f64> = (0..12).map(|m| 10.0 * 2f64.powi(m)).collect();
        let theta = 2.5;
        let r = f0_from_laplace(|l| Ok(theta / (theta + l)), &grid).unwrap();
        assert!((r.value - theta).abs() < 1e-8, "{r:?}");
        assert!(r.monotone_tail);
        let r = f0_from_laplace(|l| Ok((1.0 - (-l).exp()) / l), &grid).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(f0_from_laplace(|_| Ok(1.0), &[1.0, 2.0]).is_err());
        assert!(f0_from_laplace(|_| Ok(1.0), &[1.0, 3.0, 2.0]).is_err());
    }

    #[test]
    fn neville_is_exact_on_quadratics() {
        let pts = [(0.5, 1.0 + 0.5 * 2.0 + 0.25 * 3.0), (0.25, 1.0 + 0.5 + 0.0625 * 3.0), (0.1, 1.0 + 0.2 + 0.03)];
        assert!((neville_at_zero(&pts) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn entry_distribution_is_a_probability() {
        let g = Grid::new(Params::new(1.0, 0.25, 0.25), 4).unwrap();
        let hm = harmonic_measure(&assemble(&g)).unwrap();
        assert!((hm.p_hat.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(hm.p_hat.iter().all(|&x| x >= -1e-14));
    }

    #[test]
    fn stick_transform_near_zero_gives_the_mean() {
        let params = Params::new(1.0, 0.25, 0.5);
        let g = Grid::new(params, 4).unwrap();
        let m = assemble(&g);
        let hm = harmonic_measure(&m).unwrap();
        assert!((laplace_stick_from(&hm, &params, 1e-9).unwrap() - 1.0).abs() < 1e-8);
        let h = 1e-5;
        let f = |l: f64| laplace_stick_from(&hm, &params, l).unwrap();
        let slope = (f(2.0 * h) - f(h)) / h;
        let deriv_at_zero = 2.0 * slope - (f(h) - 1.0) / h * 1.0;
        let ps = p_stick_systems(&m).unwrap();
        let mean_stick = ps.mean_stick();
        // second-order one-sided difference
        let d = -((-3.0 * 1.0 + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h));
        assert!((d - mean_stick).abs() < 1e-6 * mean_stick.max(1.0) + 1e-6, "{d} vs {mean_stick}");
        let _ = deriv_at_zero;
    }

    #[test]
    fn slide_transform_routes_agree_and_decrease() {
        let params = Params::new(1.0, 0.25, 0.5);
        let g = Grid::new(params, 4).unwrap();
        let m = assemble(&g);
        let mop = modified_assemble(&g);
        let mut prev = 1.0;
        for lambda in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let s = laplace_slid_with(&m, &mop, lambda).unwrap();
            assert!((s.via_g - s.via_w).abs() < 1e-8, "{s:?}");
            assert!(s.via_g > 0.0 && s.via_g < prev);
            prev = s.via_g;
        }
    }

    #[test]
    fn stick_density_limit_matches_closed_form() {
        let params = Params::new(1.0, 0.25, 0.25);
        let g = Grid::new(params, 4).unwrap();
        let hm = harmonic_measure(&assemble(&g)).unwrap();
        let exact = f_stick_at_zero(&hm, &params);
        let r = f0_from_laplace(|l| laplace_stick_from(&hm, &params, l), &default_laplace_grid(&params)).unwrap();
        assert!((r.value - exact).abs() < 1e-3 * exact, "{} vs {exact}", r.value);
    }

    #[test]
    fn slide_density_vanishes_at_zero_with_friction_gap() {
        let params = Params::new(1.0, 0.25, 0.5);
        let g = Grid::new(params, 8).unwrap();
        let (m, mop) = (assemble(&g), modified_assemble(&g));
        let lambdas: Vec<f64> = (4..10).map(|k| 2f64.powi(k)).collect();
        let r = f0_from_laplace(|l| Ok(laplace_slid_with(&m, &mop, l)?.via_g), &lambdas).unwrap();
        let peak = r.samples.iter().map(|s| s.1).fold(0.0, f64::max);
        assert!(r.value.abs() < 0.05 * peak.max(1.0), "{r:?}");
    }
}
