//! Upwind finite-difference discretization of the generator and the linear
//! systems built on it.

pub mod banded;
pub mod exit;
pub mod grid;
pub mod laplace;
pub mod operator;
pub mod psd;
pub mod solve;
pub mod stationary;

use crate::error::{Error, Result};

pub use exit::{
    p_stick_systems, pi_lambda, representation_u_lambda, solve_h_w, stationary_from_excursions, strip_exit_time,
    strip_solve, AbsorbingSolver, PStick, HW,
};
pub use grid::Grid;
pub use laplace::{
    default_laplace_grid, f0_from_laplace, f_stick_at_zero, harmonic_measure, laplace_slid, laplace_slid_with,
    laplace_stick, laplace_stick_from, F0Laplace, HarmonicMeasure, LaplaceSlid,
};
pub use operator::{assemble, check_memory, factor_bytes, modified_assemble, ModifiedOperator, OperatorMatrix, DEFAULT_MEMORY_BUDGET};
pub use psd::{psd, psd_with};
pub use solve::{SolveReport, SolverOptions, System};
pub use stationary::{
    eta_marginal, resolvent_solve, stationary_measure_grid, stationary_statistics_det, stationary_statistics_with,
    statistic_function, StationaryDet, DEFAULT_LAMBDA,
};

fn max_diff(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Empirical convergence order from three nested solutions restricted to
/// shared nodes: `log2(|u_p - u_coarse| / |u_fine - u_p|)` in the max norm.
pub fn kappa(coarse: &[f64], mid: &[f64], fine: &[f64]) -> Result<f64> {
    let num = max_diff(mid, coarse)?;
    let den = max_diff(fine, mid)?;
    if den == 0.0 || num == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok((num / den).log2())
}
