//! Model parameters, the phase marker and the drift fields.
//!
//! The forcing `eta` lives on the lattice `delta * {-N, ..., N}`; everywhere in
//! the crate a lattice point is carried as its integer index and converted
//! with [`Params::eta`] on demand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when deciding whether a lattice point lies inside the
/// static band `|eta| <= mu_s`.
const BAND_SLACK: f64 = 1e-12;

/// Physical and lattice configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Static friction coefficient.
    pub mu_s: f64,
    /// Dynamic friction coefficient, `0 < mu_d <= mu_s`.
    pub mu_d: f64,
    /// Correlation time of the forcing.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Lattice spacing of the forcing.
    pub delta: f64,
    /// Truncation half-width; the lattice has `2N + 1` points with `N = floor(l_eta / delta)`.
    #[serde(default = "default_l_eta")]
    pub l_eta: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_tau() -> f64 {
    1.0
}

fn default_l_eta() -> f64 {
    4.0
}

impl Params {
    /// Unit correlation time, `L_eta = 4`, seed 0.
    pub fn new(mu_s: f64, mu_d: f64, delta: f64) -> Self {
        Self {
            mu_s,
            mu_d,
            tau: default_tau(),
            delta,
            l_eta: default_l_eta(),
            seed: 0,
        }
    }

    pub fn with_l_eta(mut self, l_eta: f64) -> Self {
        self.l_eta = l_eta;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Half-count `N` of the lattice.
    pub fn n(&self) -> i32 {
        // the slack keeps exact ratios such as 4 / 0.5 from rounding down
        (self.l_eta / self.delta * (1.0 + 1e-12)).floor() as i32
    }

    /// Lattice value of index `i`.
    #[inline]
    pub fn eta(&self, i: i32) -> f64 {
        i as f64 * self.delta
    }

    /// `eta_N = N * delta`.
    pub fn eta_max(&self) -> f64 {
        self.eta(self.n())
    }

    /// Jump rate of the forcing, `2 / (tau * delta^2)`.
    pub fn jump_rate(&self) -> f64 {
        2.0 / (self.tau * self.delta * self.delta)
    }

    /// Largest reachable speed once the process has entered its recurrent set.
    pub fn v_max(&self) -> f64 {
        self.eta_max() - self.mu_d
    }

    pub fn lattice(&self) -> LatticeIndexing {
        LatticeIndexing::new(self)
    }

    /// Checks every invariant the simulators and solvers rely on.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu_s, self.mu_d, self.tau, self.delta, self.l_eta];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if self.mu_d <= 0.0 || self.mu_s <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "friction coefficients must be positive (mu_s = {}, mu_d = {})",
                self.mu_s, self.mu_d
            )));
        }
        if self.mu_d > self.mu_s {
            return Err(Error::InvalidParams(format!(
                "need mu_d <= mu_s, got mu_d = {} > mu_s = {}",
                self.mu_d, self.mu_s
            )));
        }
        if self.tau <= 0.0 || self.delta <= 0.0 || self.l_eta <= 0.0 {
            return Err(Error::InvalidParams(
                "tau, delta and l_eta must be positive".into(),
            ));
        }
        let n = self.n();
        if n < 1 {
            return Err(Error::InvalidParams(format!(
                "l_eta = {} is smaller than delta = {}",
                self.l_eta, self.delta
            )));
        }
        if self.eta_max() <= self.mu_s {
            return Err(Error::InvalidParams(format!(
                "lattice edge eta_N = {} must exceed mu_s = {}",
                self.eta_max(),
                self.mu_s
            )));
        }
        // alpha(eta) = (1 - eta * delta / 2) / 2 must stay in [0, 1] on the interior
        let eta_inner = self.eta(n - 1);
        if eta_inner * self.delta > 2.0 {
            return Err(Error::InvalidParams(format!(
                "delta = {} too coarse for l_eta = {}: up-jump probability leaves [0, 1]",
                self.delta, self.l_eta
            )));
        }
        if self.lattice().k_mu_s >= n {
            return Err(Error::InvalidParams(
                "static band covers the whole lattice".into(),
            ));
        }
        Ok(())
    }
}

/// Index bookkeeping for the forcing lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeIndexing {
    /// Half-count: indices run over `-n..=n`.
    pub n: i32,
    /// Largest index with `eta_k <= mu_s`.
    pub k_mu_s: i32,
    /// Largest index with `eta_k < mu_d`.
    pub k_d: i32,
}

impl LatticeIndexing {
    pub fn new(params: &Params) -> Self {
        let n = params.n();
        let k_mu_s = (params.mu_s * (1.0 + BAND_SLACK) / params.delta).floor() as i32;
        let mut k_d = (params.mu_d / params.delta).ceil() as i32 - 1;
        while params.eta(k_d + 1) < params.mu_d {
            k_d += 1;
        }
        while k_d >= 0 && params.eta(k_d) >= params.mu_d {
            k_d -= 1;
        }
        Self {
            n,
            k_mu_s: k_mu_s.min(n),
            k_d,
        }
    }

    /// Number of lattice points, `2N + 1`.
    pub fn len(&self) -> usize {
        (2 * self.n + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of index `i` in a `0..2N+1` array.
    #[inline]
    pub fn offset(&self, i: i32) -> usize {
        (i + self.n) as usize
    }

    #[inline]
    pub fn in_static_band(&self, i: i32) -> bool {
        i.abs() <= self.k_mu_s
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<i32> {
        -self.n..=self.n
    }
}

/// Phase marker: sliding backwards, sticking, sliding forwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Negative,
    Static,
    Positive,
}

impl Mode {
    pub fn value(self) -> i8 {
        match self {
            Mode::Negative => -1,
            Mode::Static => 0,
            Mode::Positive => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.value() as f64
    }

    pub fn from_value(value: i8) -> Option<Self> {
        match value {
            -1 => Some(Mode::Negative),
            0 => Some(Mode::Static),
            1 => Some(Mode::Positive),
            _ => None,
        }
    }

    /// Image under the reflection `(eta, nu, v) -> (-eta, -nu, -v)`.
    pub fn reflect(self) -> Self {
        match self {
            Mode::Negative => Mode::Positive,
            Mode::Static => Mode::Static,
            Mode::Positive => Mode::Negative,
        }
    }
}

/// A point `(eta_i, nu, v)` of the process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub i: i32,
    pub nu: Mode,
    pub v: f64,
}

impl State {
    pub fn new(i: i32, nu: Mode, v: f64) -> Self {
        Self { i, nu, v }
    }

    pub fn reflect(self) -> Self {
        Self {
            i: -self.i,
            nu: self.nu.reflect(),
            v: -self.v,
        }
    }

    /// True when the state belongs to the closed state space (interior or
    /// boundary) for the given parameters.
    pub fn is_admissible(&self, params: &Params) -> bool {
        let lat = params.lattice();
        if self.i.abs() > lat.n || !self.v.is_finite() {
            return false;
        }
        match self.nu {
            Mode::Static => self.v == 0.0 && lat.in_static_band(self.i),
            Mode::Positive => self.v >= 0.0,
            Mode::Negative => self.v <= 0.0,
        }
    }
}

/// Phase marker of `(eta, v)`.
pub fn theta(eta: f64, v: f64, params: &Params) -> Mode {
    let limit = params.mu_s * (1.0 + BAND_SLACK);
    if v > 0.0 || (v == 0.0 && eta > limit) {
        Mode::Positive
    } else if v < 0.0 || (v == 0.0 && eta < -limit) {
        Mode::Negative
    } else {
        Mode::Static
    }
}

/// Marker of a lattice point, with the band test done on the index.
pub fn theta_at(i: i32, v: f64, lattice: &LatticeIndexing) -> Mode {
    if v > 0.0 {
        Mode::Positive
    } else if v < 0.0 {
        Mode::Negative
    } else if i > lattice.k_mu_s {
        Mode::Positive
    } else if i < -lattice.k_mu_s {
        Mode::Negative
    } else {
        Mode::Static
    }
}

/// Velocity drift `B(eta, nu, v)` with restoring force `b(eta, v) = eta - v`.
#[inline]
pub fn drift(eta: f64, nu: Mode, v: f64, mu_d: f64) -> f64 {
    match nu {
        Mode::Negative => mu_d + eta - v,
        Mode::Static => 0.0,
        Mode::Positive => -mu_d + eta - v,
    }
}

/// Largest reachable speed, `eta_N - mu_d`.
pub fn v_max(params: &Params) -> f64 {
    params.v_max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> Params {
        Params::new(1.0, 0.25, 0.5)
    }

    #[test]
    fn theta_branches() {
        let p = Params::new(1.0, 1.0, 0.5);
        assert_eq!(theta(0.5, 0.0, &p), Mode::Static);
        assert_eq!(theta(2.0, 0.0, &p), Mode::Positive);
        assert_eq!(theta(0.0, -0.3, &p), Mode::Negative);
        assert_eq!(theta(-2.0, 0.0, &p), Mode::Negative);
        // on-lattice threshold stays static
        assert_eq!(theta(1.0, 0.0, &p), Mode::Static);
    }

    #[test]
    fn theta_at_matches_theta() {
        let p = Params::new(1.0, 0.5, 0.25);
        let lat = p.lattice();
        for i in lat.indices() {
            for v in [-0.2, 0.0, 0.3] {
                assert_eq!(theta_at(i, v, &lat), theta(p.eta(i), v, &p));
            }
        }
    }

    #[test]
    fn drift_values() {
        assert_eq!(drift(1.0, Mode::Positive, 0.0, 0.25), 0.75);
        assert_eq!(drift(3.7, Mode::Static, 0.0, 0.25), 0.0);
        assert_eq!(drift(-1.0, Mode::Negative, -0.5, 0.25), -0.25);
    }

    #[test]
    fn v_max_values() {
        let p = Params::new(1.0, 0.25, 0.5);
        assert_eq!(v_max(&p), 3.75);
        let p = Params::new(1.0, 1.0, 0.5);
        assert_eq!(v_max(&p), 3.0);
        assert!(v_max(&p.with_l_eta(5.0)) > v_max(&p));
    }

    #[test]
    fn lattice_indices() {
        let lat = unit().lattice();
        assert_eq!(lat.n, 8);
        assert_eq!(lat.k_mu_s, 2);
        assert_eq!(lat.k_d, 0);
        let p = Params::new(1.0, 0.5, 0.125);
        let lat = p.lattice();
        assert_eq!(lat.n, 32);
        assert_eq!(lat.k_mu_s, 8);
        assert_eq!(lat.k_d, 3);
        assert!(p.eta(lat.k_mu_s) <= p.mu_s && p.eta(lat.k_mu_s + 1) > p.mu_s);
        // off-lattice threshold
        let p = Params::new(0.9, 0.3, 0.25);
        let lat = p.lattice();
        assert_eq!(lat.k_mu_s, 3);
        assert_eq!(lat.k_d, 1);
    }

    #[test]
    fn validation() {
        assert!(unit().validate().is_ok());
        assert!(Params::new(1.0, 1.5, 0.5).validate().is_err());
        assert!(Params::new(1.0, 0.0, 0.5).validate().is_err());
        assert!(Params::new(1.0, 0.5, 0.5).with_l_eta(1.0).validate().is_err());
        // alpha would go negative on the interior
        assert!(Params::new(1.0, 0.5, 0.5).with_l_eta(6.0).validate().is_err());
        assert!(Params::new(1.0, 0.5, 0.03125).validate().is_ok());
    }

    #[test]
    fn admissible_states() {
        let p = unit();
        assert!(State::new(1, Mode::Static, 0.0).is_admissible(&p));
        assert!(!State::new(3, Mode::Static, 0.0).is_admissible(&p));
        assert!(!State::new(0, Mode::Positive, -0.1).is_admissible(&p));
        assert!(State::new(3, Mode::Positive, 0.0).is_admissible(&p));
    }

    proptest! {
        #[test]
        fn drift_is_odd(eta in -4.0f64..4.0, v in -4.0f64..4.0, mu_d in 0.01f64..1.0, m in 0i8..3) {
            let nu = Mode::from_value(m - 1).unwrap();
            let lhs = drift(-eta, nu.reflect(), -v, mu_d);
            prop_assert!((lhs + drift(eta, nu, v, mu_d)).abs() < 1e-12);
        }

        #[test]
        fn theta_is_equivariant(i in -8i32..=8, v in prop_oneof![Just(0.0), -3.0f64..3.0]) {
            let p = unit();
            let m = theta(p.eta(i), v, &p);
            prop_assert_eq!(theta(p.eta(-i), -v, &p), m.reflect());
        }
    }
}
