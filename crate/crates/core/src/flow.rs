//! Closed-form velocity flows between jumps.
//!
//! With `b(eta, v) = eta - v` the sliding dynamics is linear,
//! `dv/dt = (eta - nu * mu_d) - v`, so every segment relaxes exponentially
//! toward `eta - nu * mu_d`.

use crate::model::{Mode, Params, State};

/// Functionals accumulated along trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntegralKind {
    One,
    VSquared,
    EtaSquared,
    /// `1{v = 0, |eta| <= mu_s}`, i.e. time spent sticking.
    StickIndicator,
    /// `1{|eta| <= mu_s}` regardless of the phase.
    BandIndicator,
    Velocity,
    Eta,
}

impl IntegralKind {
    pub const COUNT: usize = 7;

    pub const ALL: [IntegralKind; Self::COUNT] = [
        IntegralKind::One,
        IntegralKind::VSquared,
        IntegralKind::EtaSquared,
        IntegralKind::StickIndicator,
        IntegralKind::BandIndicator,
        IntegralKind::Velocity,
        IntegralKind::Eta,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            IntegralKind::One => "one",
            IntegralKind::VSquared => "v_squared",
            IntegralKind::EtaSquared => "eta_squared",
            IntegralKind::StickIndicator => "stick_indicator",
            IntegralKind::BandIndicator => "band_indicator",
            IntegralKind::Velocity => "v",
            IntegralKind::Eta => "eta",
        }
    }
}

/// One deterministic piece of trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSegment {
    pub eta: f64,
    pub nu: Mode,
    pub v0: f64,
    pub duration: f64,
}

/// Velocity after time `t` from `v` in mode `nu`.
#[inline]
pub fn flow(eta: f64, nu: Mode, t: f64, v: f64, mu_d: f64) -> f64 {
    if nu == Mode::Static {
        return 0.0;
    }
    let target = eta - nu.as_f64() * mu_d;
    target + (v - target) * (-t).exp()
}

/// Time until the flow from `(eta, nu, v)` reaches `v = 0`, or `+inf`.
#[inline]
pub fn hitting_time_raw(eta: f64, nu: Mode, v: f64, mu_d: f64) -> f64 {
    match nu {
        Mode::Positive if v > 0.0 && eta - mu_d < 0.0 => (v / (mu_d - eta)).ln_1p(),
        Mode::Negative if v < 0.0 && eta + mu_d > 0.0 => (-v / (eta + mu_d)).ln_1p(),
        _ => f64::INFINITY,
    }
}

/// Hitting time of the velocity boundary for a state of the process.
pub fn hitting_time(state: &State, params: &Params) -> f64 {
    hitting_time_raw(params.eta(state.i), state.nu, state.v, params.mu_d)
}

/// Exact value of `int_0^duration f(eta, v(s)) ds` along `seg`.
pub fn segment_integral(kind: IntegralKind, seg: &FlowSegment, params: &Params) -> f64 {
    let t = seg.duration;
    if t <= 0.0 {
        return 0.0;
    }
    match kind {
        IntegralKind::One => t,
        IntegralKind::EtaSquared => seg.eta * seg.eta * t,
        IntegralKind::BandIndicator => {
            if in_band(seg.eta, params) {
                t
            } else {
                0.0
            }
        }
        IntegralKind::StickIndicator => {
            if seg.nu == Mode::Static && in_band(seg.eta, params) {
                t
            } else {
                0.0
            }
        }
        IntegralKind::VSquared => v_squared_integral(seg.eta, seg.nu, seg.v0, t, params.mu_d),
        IntegralKind::Velocity => v_integral(seg.eta, seg.nu, seg.v0, t, params.mu_d),
        IntegralKind::Eta => seg.eta * t,
    }
}

#[inline]
fn in_band(eta: f64, params: &Params) -> bool {
    eta.abs() <= params.mu_s * (1.0 + 1e-12)
}

/// `int_0^t (a + c e^{-s})^2 ds = a^2 t + 2ac(1 - e^{-t}) + c^2 (1 - e^{-2t}) / 2`
/// with `a = eta - nu mu_d` and `c = v - a`.
#[inline]
pub fn v_squared_integral(eta: f64, nu: Mode, v: f64, t: f64, mu_d: f64) -> f64 {
    if nu == Mode::Static || t <= 0.0 {
        return 0.0;
    }
    let a = eta - nu.as_f64() * mu_d;
    let c = v - a;
    let e1 = -(-t).exp_m1();
    let e2 = -(-2.0 * t).exp_m1();
    a * a * t + 2.0 * a * c * e1 + 0.5 * c * c * e2
}

/// `int_0^t v(s) ds = a t + c (1 - e^{-t})`.
#[inline]
pub fn v_integral(eta: f64, nu: Mode, v: f64, t: f64, mu_d: f64) -> f64 {
    if nu == Mode::Static || t <= 0.0 {
        return 0.0;
    }
    let a = eta - nu.as_f64() * mu_d;
    a * t - (v - a) * (-t).exp_m1()
}

/// Accumulates all [`IntegralKind`]s of `seg` into `acc`.
#[inline]
pub fn accumulate_segment(acc: &mut [f64; IntegralKind::COUNT], seg: &FlowSegment, params: &Params) {
    let t = seg.duration;
    if t <= 0.0 {
        return;
    }
    acc[IntegralKind::One.index()] += t;
    acc[IntegralKind::EtaSquared.index()] += seg.eta * seg.eta * t;
    if in_band(seg.eta, params) {
        acc[IntegralKind::BandIndicator.index()] += t;
        if seg.nu == Mode::Static {
            acc[IntegralKind::StickIndicator.index()] += t;
        }
    }
    acc[IntegralKind::VSquared.index()] += v_squared_integral(seg.eta, seg.nu, seg.v0, t, params.mu_d);
    acc[IntegralKind::Velocity.index()] += v_integral(seg.eta, seg.nu, seg.v0, t, params.mu_d);
    acc[IntegralKind::Eta.index()] += seg.eta * t;
}
