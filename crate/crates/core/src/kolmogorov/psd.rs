//! Velocity power spectral density from complex-shifted solves.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::model::Params;

use super::grid::Grid;
use super::operator::{assemble, OperatorMatrix};
use super::solve::System;
use super::stationary::stationary_measure_grid;

/// Real shift standing in for `omega = 0`, where `-M` is singular.
const ZERO_FREQUENCY_SHIFT: f64 = 1e-8;

/// `S_v(omega) = 2 Re sum pi v phi` with `(i omega - M) phi = v`.
///
/// At `omega = 0` the right-hand side is centred under `pi` and solved with
/// a tiny real shift, which removes the constant null direction.
pub fn psd_with(m: &OperatorMatrix, pi: &[f64], omegas: &[f64]) -> Result<Vec<f64>> {
    let grid = &m.grid;
    let v: Vec<f64> = (0..grid.len()).map(|r| grid.v(grid.coords(r).1)).collect();
    let mean_v = Grid::pair(pi, &v);
    omegas
        .par_iter()
        .map(|&omega| {
            let phi: Vec<Complex64> = if omega == 0.0 {
                let rhs: Vec<f64> = v.iter().map(|x| x - mean_v).collect();
                System::new(m, ZERO_FREQUENCY_SHIFT, &[])?
                    .solve(&rhs)?
                    .into_iter()
                    .map(Complex64::from)
                    .collect()
            } else {
                let rhs: Vec<Complex64> = v.iter().map(|&x| Complex64::from(x)).collect();
                System::new(m, Complex64::new(0.0, omega), &[])?.solve(&rhs)?
            };
            let s: f64 = pi.iter().zip(&v).zip(&phi).map(|((p, x), f)| p * x * f.re).sum();
            Ok(2.0 * s)
        })
        .collect()
}

/// PSD on the grid of refinement `p`.
pub fn psd(params: &Params, p: u32, omegas: &[f64]) -> Result<Vec<f64>> {
    let grid = Grid::new(*params, p)?;
    let m = assemble(&grid);
    let pi = stationary_measure_grid(&m)?;
    psd_with(&m, &pi, omegas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_and_nonnegative() {
        let params = Params::new(1.0, 0.25, 0.5);
        let omegas: Vec<f64> = (-16..=16).map(|k| 0.25 * f64::from(k)).collect();
        let s = psd(&params, 4, &omegas).unwrap();
        for k in 0..omegas.len() {
            assert!(s[k] >= -1e-8, "{} {}", omegas[k], s[k]);
            let mirror = s[omegas.len() - 1 - k];
            assert!((s[k] - mirror).abs() < 1e-8 * s[k].abs().max(1.0));
        }
    }

    #[test]
    fn zero_frequency_is_the_limit_of_small_frequencies() {
        let params = Params::new(1.0, 0.25, 0.5);
        let s = psd(&params, 4, &[0.0, 1e-4]).unwrap();
        assert!((s[0] - s[1]).abs() < 1e-4 * s[0].abs(), "{s:?}");
    }

    #[test]
    fn integral_of_spectrum_is_the_variance() {
        // (1/2pi) int S = E[v^2]; the spectrum decays like 1/omega^2 at least
        let params = Params::new(1.0, 0.25, 0.5);
        let grid = Grid::new(params, 4).unwrap();
        let m = assemble(&grid);
        let pi = stationary_measure_grid(&m).unwrap();
        let v2: f64 = (0..grid.len()).map(|r| pi[r] * grid.v(grid.coords(r).1).powi(2)).sum();
        let h = 0.05;
        let omegas: Vec<f64> = (0..4000).map(|k| h * (k as f64 + 0.5)).collect();
        let s = psd_with(&m, &pi, &omegas).unwrap();
        let tail_c = s.last().unwrap() * omegas.last().unwrap().powi(2);
        let integral = 2.0 * (s.iter().sum::<f64>() * h + tail_c / omegas.last().unwrap());
        let var = integral / (2.0 * std::f64::consts::PI);
        assert!((var - v2).abs() < 0.01 * v2, "{var} vs {v2}");
    }
}
