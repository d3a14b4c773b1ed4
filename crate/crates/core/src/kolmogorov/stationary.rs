//! Resolvent solves and the stationary law on the grid.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mc_stats::Statistic;
use crate::model::Params;

use super::grid::Grid;
use super::operator::{assemble, OperatorMatrix};
use super::solve::{SolveReport, SolverOptions, System};

/// Default resolvent parameter for stationary averages.
pub const DEFAULT_LAMBDA: f64 = 1e-6;

/// Solves `(lambda I - M) u = f`.
pub fn resolvent_solve(m: &OperatorMatrix, lambda: f64, f: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("resolvent needs lambda > 0, got {lambda}")));
    }
    let sys = System::new(m, lambda, &[])?;
    let u = sys.solve(f)?;
    Ok((u, sys.report()))
}

/// Node values of the functional behind a statistic.
pub fn statistic_function(grid: &Grid, stat: Statistic) -> Vec<f64> {
    (0..grid.len())
        .map(|r| {
            let (i, j) = grid.coords(r);
            match stat {
                Statistic::S1 => f64::from(u8::from(grid.is_static(r))),
                Statistic::S2 => grid.v(j).powi(2),
                Statistic::S3 => f64::from(u8::from(grid.lattice.in_static_band(i))),
                Statistic::S4 => grid.eta(i).powi(2),
            }
        })
        .collect()
}

/// `u_lambda(f)` for the four statistics, sharing one factorization.
#[derive(Debug, Clone)]
pub struct StationaryDet {
    pub grid: Grid,
    pub lambda: f64,
    pub u: BTreeMap<Statistic, Vec<f64>>,
    pub report: SolveReport,
}

impl StationaryDet {
    /// `lambda u_lambda(f)` at `s+`.
    pub fn value(&self, stat: Statistic) -> f64 {
        self.value_at(stat, self.grid.s_plus())
    }

    pub fn value_at(&self, stat: Statistic, node: usize) -> f64 {
        self.lambda * self.u[&stat][node]
    }

    pub fn values(&self) -> BTreeMap<Statistic, f64> {
        Statistic::ALL.into_iter().map(|s| (s, self.value(s))).collect()
    }
}

pub fn stationary_statistics_with(m: &OperatorMatrix, lambda: f64, options: SolverOptions) -> Result<StationaryDet> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("resolvent needs lambda > 0, got {lambda}")));
    }
    let sys = System::with_options(m, lambda, &[], options)?;
    let mut u = BTreeMap::new();
    for stat in Statistic::ALL {
        u.insert(stat, sys.solve(&statistic_function(&m.grid, stat))?);
    }
    Ok(StationaryDet { grid: m.grid, lambda, u, report: sys.report() })
}

/// S1..S4 as `lambda u_lambda(f)` at `s+` on the grid of refinement `p`.
pub fn stationary_statistics_det(params: &Params, p: u32, lambda: f64) -> Result<StationaryDet> {
    let grid = Grid::new(*params, p)?;
    stationary_statistics_with(&assemble(&grid), lambda, SolverOptions::default())
}

/// Stationary probability vector: `M^T pi = 0`, `sum pi = 1`, by inverse
/// iteration on `(lambda I - M)^T` with a tiny shift.
pub fn stationary_measure_grid(m: &OperatorMatrix) -> Result<Vec<f64>> {
    let shift = 1e-8;
    let sys = System::new(m, shift, &[])?;
    let n = m.len();
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..50 {
        let mut y = sys.solve_transpose(&x)?;
        let total: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v /= total);
        let change: f64 = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = y;
        if change < 1e-13 {
            x.iter_mut().for_each(|v| {
                if *v < 0.0 {
                    *v = 0.0
                }
            });
            let total: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= total);
            return Ok(x);
        }
    }
    Err(Error::NoConvergence("inverse iteration for the stationary measure".into()))
}

/// Forcing marginal of a node measure.
pub fn eta_marginal(grid: &Grid, pi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.n_eta()];
    for (r, &x) in pi.iter().enumerate() {
        let (i, _) = grid.coords(r);
        out[grid.lattice.offset(i)] += x;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise_chain::invariant_measure;

    #[test]
    fn constant_and_odd_right_hand_sides() {
        let g = Grid::new(Params::new(1.0, 0.25, 0.5), 4).unwrap();
        let m = assemble(&g);
        let (u, rep) = resolvent_solve(&m, 1e-6, &vec![1.0; g.len()]).unwrap();
        // conditioning of the resolvent grows like 1 / lambda
        assert!(u.iter().all(|x| (x * 1e-6 - 1.0).abs() < 1e-8));
        assert!(rep.max_residual < 1e-10);
        let (u, _) = resolvent_solve(&m, 1e-6, &g.node_function(|_, _, v| v)).unwrap();
        assert!((1e-6 * u[g.node(0, 0)]).abs() < 1e-9);
        assert!(resolvent_solve(&m, 0.0, &vec![1.0; g.len()]).is_err());
    }

    #[test]
    fn stationary_values_agree_with_measure_and_between_nodes() {
        let params = Params::new(1.0, 0.25, 0.5);
        let det = stationary_statistics_det(&params, 8, 1e-6).unwrap();
        let g = det.grid;
        let m = assemble(&g);
        let pi = stationary_measure_grid(&m).unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pi.iter().all(|&x| x >= 0.0));
        let resid = m.apply_transpose(&pi);
        assert!(resid.iter().all(|x| x.abs() < 1e-9));
        for stat in Statistic::ALL {
            let f = statistic_function(&g, stat);
            let from_pi = Grid::pair(&pi, &f);
            let a = det.value(stat);
            let b = det.value_at(stat, g.node(-4, 3));
            assert!((a - from_pi).abs() < 1e-4, "{stat:?} {a} {from_pi}");
            assert!((a - b).abs() < 1e-5 * a.abs().max(1e-3), "{stat:?} {a} {b}");
        }
        // reflection symmetry of the discrete problem
        let u = &det.u[&Statistic::S2];
        for r in (0..g.len()).step_by(37) {
            assert!((u[r] - u[g.reflect(r)]).abs() < 1e-6 * u[r].abs().max(1.0));
        }
    }

    #[test]
    fn stick_probability_is_lambda_stable() {
        let params = Params::new(1.0, 0.25, 0.5);
        let a = stationary_statistics_det(&params, 4, 1e-5).unwrap();
        let b = stationary_statistics_det(&params, 4, 1e-7).unwrap();
        for stat in Statistic::ALL {
            let (x, y) = (a.value(stat), b.value(stat));
            assert!((x - y).abs() < 1e-4 * y.abs(), "{stat:?}");
        }
    }

    #[test]
    fn forcing_marginal_approaches_chain_law() {
        let params = Params::new(1.0, 0.25, 0.5);
        let g_chain = invariant_measure(&params);
        let mut errs = Vec::new();
        for p in [4, 16, 64] {
            let g = Grid::new(params, p).unwrap();
            let pi = stationary_measure_grid(&assemble(&g)).unwrap();
            let marg = eta_marginal(&g, &pi);
            let err = marg.iter().zip(&g_chain).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            errs.push(err);
        }
        // the frozen-forcing zero-velocity rows cost O(1/p)
        assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
        assert!(errs[2] < 0.01, "{errs:?}");
    }

    #[test]
    fn known_stick_probability() {
        let det = stationary_statistics_det(&Params::new(1.0, 0.25, 0.5), 64, 1e-6).unwrap();
        let s1 = det.value(Statistic::S1);
        assert!(s1 > 0.25 && s1 < 0.31, "{s1}");
        let s3 = det.value(Statistic::S3);
        assert!((s3 - 0.789886).abs() < 0.01, "{s3}");
    }
}
