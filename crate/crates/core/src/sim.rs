//! Event-driven exact simulation.
//!
//! Between events the velocity follows the closed-form flow; the next event
//! is whichever comes first of the exponential clock of the forcing (rate
//! `Lambda`) and the deterministic hitting time of `v = 0`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{
    accumulate_segment, flow, hitting_time_raw, segment_integral, v_integral, FlowSegment, IntegralKind,
};
use crate::model::{theta_at, LatticeIndexing, Mode, Params, State};
use crate::noise_chain::alpha_at;

pub const DEFAULT_EVENT_CAP: u64 = 1_000_000_000;

/// Number of excursions simulated per RNG stream in [`simulate_excursions`].
pub const BATCH_SIZE: usize = 4096;

/// Which exit point of the static band an excursion starts or ends at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

/// One regeneration cycle: a sliding phase from `s+` (or `s-`) followed by a
/// sticking phase, ending when the forcing pulls the mass out of the band.
#[derive(Debug, Clone, PartialEq)]
pub struct Excursion {
    pub start: Side,
    pub exit: Side,
    /// Total duration.
    pub tau1: f64,
    /// Duration of the sliding phase.
    pub tau_hat1: f64,
    /// Lattice index at which the sticking phase began.
    pub entry_index: i32,
    pub integrals: [f64; IntegralKind::COUNT],
    pub n_events: u64,
}

impl Excursion {
    pub fn integral(&self, kind: IntegralKind) -> f64 {
        self.integrals[kind.index()]
    }

    pub fn stick_duration(&self) -> f64 {
        self.tau1 - self.tau_hat1
    }

    pub fn slide_duration(&self) -> f64 {
        self.tau_hat1
    }
}

/// What triggered an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Random jump of the forcing.
    Jump,
    /// The velocity reached zero: the mode switches.
    Boundary,
}

/// Piecewise deterministic trajectory: post-event states at event times.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    /// `times[0] = 0` holds the initial state.
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub kinds: Vec<Option<EventKind>>,
    pub t_end: f64,
    pub params: Params,
}

impl PathRecord {
    pub fn n_events(&self) -> usize {
        self.times.len() - 1
    }

    fn segment_end(&self, k: usize) -> f64 {
        self.times.get(k + 1).copied().unwrap_or(self.t_end)
    }

    /// `int_a^b f(Z_t) dt`.
    pub fn integrate(&self, kind: IntegralKind, a: f64, b: f64) -> f64 {
        self.integrate_with(a, b, |seg| segment_integral(kind, seg, &self.params))
    }

    /// `int_a^b v_t dt`.
    pub fn integrate_velocity(&self, a: f64, b: f64) -> f64 {
        let mu_d = self.params.mu_d;
        self.integrate_with(a, b, |s| v_integral(s.eta, s.nu, s.v0, s.duration, mu_d))
    }

    /// Sum of `segment_value` over the pieces of the path inside `[a, b]`.
    pub fn integrate_with(&self, a: f64, b: f64, segment_value: impl Fn(&FlowSegment) -> f64) -> f64 {
        let mut acc = 0.0;
        let start = self.times.partition_point(|&t| t <= a).saturating_sub(1);
        for k in start..self.times.len() {
            let t0 = self.times[k];
            let t1 = self.segment_end(k);
            if t0 >= b {
                break;
            }
            let lo = t0.max(a);
            let hi = t1.min(b);
            if hi <= lo {
                continue;
            }
            let s = self.states[k];
            let eta = self.params.eta(s.i);
            let v_lo = flow(eta, s.nu, lo - t0, s.v, self.params.mu_d);
            let seg = FlowSegment { eta, nu: s.nu, v0: v_lo, duration: hi - lo };
            acc += segment_value(&seg);
        }
        acc
    }

    pub fn time_average(&self, kind: IntegralKind) -> f64 {
        self.integrate(kind, 0.0, self.t_end) / self.t_end
    }

    /// Time averages over `n` consecutive windows of equal length.
    pub fn batch_averages(&self, kind: IntegralKind, n: usize) -> Vec<f64> {
        self.window_averages(n, |a, b| self.integrate(kind, a, b))
    }

    pub fn velocity_batch_averages(&self, n: usize) -> Vec<f64> {
        self.window_averages(n, |a, b| self.integrate_velocity(a, b))
    }

    pub fn eta_batch_averages(&self, n: usize) -> Vec<f64> {
        self.window_averages(n, |a, b| self.integrate_with(a, b, |s| s.eta * s.duration))
    }

    fn window_averages(&self, n: usize, integral: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let w = self.t_end / n as f64;
        (0..n).map(|b| integral(b as f64 * w, (b + 1) as f64 * w) / w).collect()
    }

    /// State at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> State {
        let k = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        let s = self.states[k];
        let v = flow(self.params.eta(s.i), s.nu, t - self.times[k], s.v, self.params.mu_d);
        State { v, ..s }
    }

    /// Velocity at `t = 0, dt, 2 dt, ...` strictly before `t_end`.
    pub fn sample_velocity(&self, dt: f64) -> Vec<f64> {
        let n = (self.t_end / dt).floor() as usize;
        let mut out = Vec::with_capacity(n);
        let mut k = 0;
        for m in 0..n {
            let t = m as f64 * dt;
            while k + 1 < self.times.len() && self.times[k + 1] <= t {
                k += 1;
            }
            let s = self.states[k];
            out.push(flow(self.params.eta(s.i), s.nu, t - self.times[k], s.v, self.params.mu_d));
        }
        out
    }

    /// CSV dump with columns `t,eta,nu,v`, one row per event.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,eta,nu,v")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(out, "{:.12e},{:.12e},{},{:.12e}", t, self.params.eta(s.i), s.nu.value(), s.v)?;
        }
        Ok(())
    }
}

/// Outcome of one event step.
enum Step {
    Move { dt: f64, next: State, kind: EventKind },
    Exit { dt: f64, side: Side },
}

/// Exact simulator of the stick-slip process for one parameter set.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: Params,
    lattice: LatticeIndexing,
    alpha: Vec<f64>,
    rate: f64,
    event_cap: u64,
}

impl Simulator {
    pub fn new(params: Params) -> Result<Self> {
        params.validate()?;
        let lattice = params.lattice();
        let alpha = lattice.indices().map(|i| alpha_at(i, &params)).collect();
        Ok(Self {
            params,
            lattice,
            alpha,
            rate: params.jump_rate(),
            event_cap: DEFAULT_EVENT_CAP,
        })
    }

    pub fn with_event_cap(mut self, cap: u64) -> Self {
        self.event_cap = cap;
        self
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn lattice(&self) -> &LatticeIndexing {
        &self.lattice
    }

    /// `s+ = (eta_{k+1}, +1, 0)` or its mirror image.
    pub fn exit_point(&self, side: Side) -> State {
        let k = self.lattice.k_mu_s + 1;
        match side {
            Side::Plus => State::new(k, Mode::Positive, 0.0),
            Side::Minus => State::new(-k, Mode::Negative, 0.0),
        }
    }

    #[inline]
    fn jump<R: Rng + ?Sized>(&self, i: i32, rng: &mut R) -> i32 {
        if rng.random::<f64>() < self.alpha[self.lattice.offset(i)] {
            i + 1
        } else {
            i - 1
        }
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&self, s: State, rng: &mut R) -> (Step, FlowSegment) {
        let clock: f64 = Exp1.sample(rng);
        let clock = clock / self.rate;
        let eta = self.params.eta(s.i);
        let mu_d = self.params.mu_d;
        if s.nu == Mode::Static {
            let seg = FlowSegment { eta, nu: s.nu, v0: 0.0, duration: clock };
            let j = self.jump(s.i, rng);
            let k = self.lattice.k_mu_s;
            let step = if j > k {
                Step::Exit { dt: clock, side: Side::Plus }
            } else if j < -k {
                Step::Exit { dt: clock, side: Side::Minus }
            } else {
                Step::Move {
                    dt: clock,
                    next: State::new(j, Mode::Static, 0.0),
                    kind: EventKind::Jump,
                }
            };
            return (step, seg);
        }
        let t_hit = hitting_time_raw(eta, s.nu, s.v, mu_d);
        if clock < t_hit {
            let v = flow(eta, s.nu, clock, s.v, mu_d);
            let same_sign = match s.nu {
                Mode::Positive => v > 0.0 || (s.v == 0.0 && v >= 0.0),
                _ => v < 0.0 || (s.v == 0.0 && v <= 0.0),
            };
            if same_sign {
                let seg = FlowSegment { eta, nu: s.nu, v0: s.v, duration: clock };
                let j = self.jump(s.i, rng);
                let next = State::new(j, s.nu, v);
                return (Step::Move { dt: clock, next, kind: EventKind::Jump }, seg);
            }
            // the clock fired within rounding of the hitting time
        }
        let seg = FlowSegment { eta, nu: s.nu, v0: s.v, duration: t_hit };
        let nu = theta_at(s.i, 0.0, &self.lattice);
        let next = State::new(s.i, nu, 0.0);
        (Step::Move { dt: t_hit, next, kind: EventKind::Boundary }, seg)
    }

    /// One excursion from `s+`.
    pub fn simulate_excursion<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Excursion> {
        self.simulate_excursion_from(Side::Plus, rng)
    }

    /// One excursion from `s+` or `s-`, run until the sticking phase ends.
    pub fn simulate_excursion_from<R: Rng + ?Sized>(&self, start: Side, rng: &mut R) -> Result<Excursion> {
        let mut state = self.exit_point(start);
        let mut t = 0.0;
        let mut tau_hat = None;
        let mut entry_index = 0;
        let mut integrals = [0.0; IntegralKind::COUNT];
        let mut n_events = 0u64;
        loop {
            if n_events >= self.event_cap {
                return Err(Error::EventCapExceeded { cap: self.event_cap, time: t });
            }
            let (step, seg) = self.step(state, rng);
            accumulate_segment(&mut integrals, &seg, &self.params);
            n_events += 1;
            match step {
                Step::Move { dt, next, .. } => {
                    t += dt;
                    if next.nu == Mode::Static && tau_hat.is_none() {
                        tau_hat = Some(t);
                        entry_index = next.i;
                    }
                    state = next;
                }
                Step::Exit { dt, side } => {
                    t += dt;
                    return Ok(Excursion {
                        start,
                        exit: side,
                        tau1: t,
                        tau_hat1: tau_hat.expect("exit only happens from the static phase"),
                        entry_index,
                        integrals,
                        n_events,
                    });
                }
            }
        }
    }

    /// Trajectory on `[0, t_end]` from `initial`, with no stopping set.
    pub fn simulate_path<R: Rng + ?Sized>(&self, t_end: f64, initial: State, rng: &mut R) -> Result<PathRecord> {
        if !initial.is_admissible(&self.params) {
            return Err(Error::Domain(format!("initial state {initial:?} is outside the state space")));
        }
        let mut times = vec![0.0];
        let mut states = vec![initial];
        let mut kinds = vec![None];
        let mut state = initial;
        let mut t = 0.0;
        let k = self.lattice.k_mu_s;
        loop {
            if times.len() as u64 > self.event_cap {
                return Err(Error::EventCapExceeded { cap: self.event_cap, time: t });
            }
            let (step, _) = self.step(state, rng);
            let (dt, next, kind) = match step {
                Step::Move { dt, next, kind } => (dt, next, kind),
                Step::Exit { dt, side } => {
                    let next = match side {
                        Side::Plus => State::new(k + 1, Mode::Positive, 0.0),
                        Side::Minus => State::new(-k - 1, Mode::Negative, 0.0),
                    };
                    (dt, next, EventKind::Jump)
                }
            };
            if t + dt >= t_end {
                break;
            }
            t += dt;
            times.push(t);
            states.push(next);
            kinds.push(Some(kind));
            state = next;
        }
        Ok(PathRecord { times, states, kinds, t_end, params: self.params })
    }
}

/// Reproducible RNG for replica `stream` under a master `seed`.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` i.i.d. excursions from `s+`, simulated in parallel batches.
///
/// Batch `b` always uses stream `b` of `seed`, so the result does not depend
/// on the number of worker threads.
pub fn simulate_excursions(sim: &Simulator, n: usize, seed: u64) -> Result<Vec<Excursion>> {
    simulate_excursions_from(sim, n, seed, Side::Plus)
}

pub fn simulate_excursions_from(sim: &Simulator, n: usize, seed: u64, start: Side) -> Result<Vec<Excursion>> {
    let batches = n.div_ceil(BATCH_SIZE);
    let chunks: Result<Vec<Vec<Excursion>>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = replica_rng(seed, b as u64);
            let len = BATCH_SIZE.min(n - b * BATCH_SIZE);
            (0..len).map(|_| sim.simulate_excursion_from(start, &mut rng)).collect()
        })
        .collect();
    Ok(chunks?.into_iter().flatten().collect())
}

/// Sampled output of the penalized reference solver.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedPath {
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
    pub v: Vec<f64>,
    /// Time average of `v^2` over every step, not just recorded ones.
    pub mean_v_squared: f64,
    pub mean_eta_squared: f64,
}

/// Derivative of the Moreau-Yosida regularization of `mu |v|`.
#[inline]
pub fn penalty_derivative(v: f64, penalty: f64, mu: f64) -> f64 {
    mu * (penalty * v).clamp(-1.0, 1.0)
}

/// Reference solver for equal friction coefficients: Euler-Maruyama for the
/// Ornstein-Uhlenbeck forcing coupled to explicit Euler for the penalized
/// velocity equation `dv/dt + phi_p'(v) = eta - v`.
///
/// Starts from `(eta, v) = (0, 0)` and records every `record_every` steps.
pub fn simulate_penalized_reference<R: Rng + ?Sized>(
    params: &Params,
    penalty: f64,
    t_end: f64,
    dt: f64,
    record_every: usize,
    rng: &mut R,
) -> Result<PenalizedPath> {
    if (params.mu_s - params.mu_d).abs() > 1e-12 * params.mu_s {
        return Err(Error::InvalidParams(
            "the penalized reference needs mu_s = mu_d".into(),
        ));
    }
    if !(dt > 0.0) || !(t_end > 0.0) || !(penalty > 0.0) {
        return Err(Error::InvalidParams("dt, t_end and penalty must be positive".into()));
    }
    let mu = params.mu_s;
    let tau = params.tau;
    let steps = (t_end / dt).round() as usize;
    let noise_scale = (2.0 * dt / tau).sqrt();
    let record_every = record_every.max(1);
    let mut out = PenalizedPath {
        times: Vec::with_capacity(steps / record_every + 1),
        eta: Vec::with_capacity(steps / record_every + 1),
        v: Vec::with_capacity(steps / record_every + 1),
        mean_v_squared: 0.0,
        mean_eta_squared: 0.0,
    };
    let (mut eta, mut v) = (0.0f64, 0.0f64);
    let (mut sum_v2, mut sum_e2) = (0.0, 0.0);
    for k in 0..=steps {
        if k % record_every == 0 {
            out.times.push(k as f64 * dt);
            out.eta.push(eta);
            out.v.push(v);
        }
        if k == steps {
            break;
        }
        sum_v2 += v * v;
        sum_e2 += eta * eta;
        let xi: f64 = StandardNormal.sample(rng);
        let dv = (eta - v - penalty_derivative(v, penalty, mu)) * dt;
        eta += -eta / tau * dt + noise_scale * xi;
        v += dv;
    }
    out.mean_v_squared = sum_v2 / steps as f64;
    out.mean_eta_squared = sum_e2 / steps as f64;
    Ok(out)
}

/// Same as [`simulate_penalized_reference`] with a frozen forcing `eta`.
pub fn penalized_frozen_forcing(params: &Params, penalty: f64, eta: f64, v0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let steps = (t_end / dt).round() as usize;
    let mut v = v0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(v);
    for _ in 0..steps {
        v += (eta - v - penalty_derivative(v, penalty, params.mu_s)) * dt;
        out.push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::theta;

    fn sim(mu_d: f64, delta: f64) -> Simulator {
        Simulator::new(Params::new(1.0, mu_d, delta)).unwrap()
    }

    #[test]
    fn excursions_end_at_exit_points() {
        let s = sim(0.25, 0.5);
        let mut rng = replica_rng(1, 0);
        for _ in 0..2000 {
            let e = s.simulate_excursion(&mut rng).unwrap();
            assert!(e.tau_hat1 > 0.0 && e.tau_hat1 <= e.tau1);
            assert!((e.integral(IntegralKind::One) - e.tau1).abs() < 1e-9 * e.tau1.max(1.0));
            let stick = e.integral(IntegralKind::StickIndicator);
            assert!((stick - e.stick_duration()).abs() < 1e-9 * e.tau1.max(1.0));
            assert!(e.entry_index.abs() <= s.lattice().k_mu_s);
        }
    }

    #[test]
    fn marker_consistency_and_continuity_along_paths() {
        for mu_d in [0.25, 1.0] {
            let s = sim(mu_d, 0.25);
            let p = *s.params();
            let mut rng = replica_rng(2, 0);
            let path = s.simulate_path(200.0, State::new(0, Mode::Static, 0.0), &mut rng).unwrap();
            let vmax = p.v_max();
            for k in 0..path.times.len() {
                let st = path.states[k];
                assert_eq!(theta(p.eta(st.i), st.v, &p), st.nu, "event {k}: {st:?}");
                assert!(st.v.abs() <= vmax + 1e-12);
                if k > 0 {
                    assert!(path.times[k] > path.times[k - 1]);
                    // velocity is continuous: value just before the event equals the new one
                    let prev = path.states[k - 1];
                    let before = flow(p.eta(prev.i), prev.nu, path.times[k] - path.times[k - 1], prev.v, p.mu_d);
                    assert!((before - st.v).abs() < 1e-12, "jump in v at event {k}");
                }
            }
        }
    }

    #[test]
    fn velocity_stays_bounded_from_large_start() {
        let s = sim(0.5, 0.5);
        let mut rng = replica_rng(4, 0);
        let path = s.simulate_path(50.0, State::new(-3, Mode::Positive, 6.0), &mut rng).unwrap();
        let bound = 6.0f64.max(s.params().v_max());
        for t in path.sample_velocity(0.01) {
            assert!(t.abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn sliding_then_sticking() {
        let s = sim(0.25, 0.25);
        let p = *s.params();
        let mut rng = replica_rng(9, 3);
        for _ in 0..200 {
            let e = s.simulate_excursion(&mut rng).unwrap();
            // band occupancy never exceeds the total, sticking is contained in the band
            assert!(e.integral(IntegralKind::BandIndicator) >= e.integral(IntegralKind::StickIndicator) - 1e-12);
            assert!(e.integral(IntegralKind::VSquared) > 0.0);
            let _ = p;
        }
    }

    #[test]
    fn batches_are_reproducible_and_ordered() {
        let s = sim(0.5, 0.5);
        let a = simulate_excursions(&s, 5000, 42).unwrap();
        let b = simulate_excursions(&s, 5000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5000);
        let mut rng = replica_rng(42, 1);
        let first_of_second = s.simulate_excursion(&mut rng).unwrap();
        assert_eq!(a[BATCH_SIZE], first_of_second);
    }

    #[test]
    fn event_cap_is_reported() {
        let s = sim(0.25, 0.125).with_event_cap(3);
        let mut rng = replica_rng(0, 0);
        let mut saw_cap = false;
        for _ in 0..20 {
            if let Err(Error::EventCapExceeded { cap, .. }) = s.simulate_excursion(&mut rng) {
                assert_eq!(cap, 3);
                saw_cap = true;
            }
        }
        assert!(saw_cap);
    }

    #[test]
    fn path_integrals_split_additively() {
        let s = sim(0.25, 0.5);
        let mut rng = replica_rng(7, 0);
        let path = s.simulate_path(30.0, s.exit_point(Side::Plus), &mut rng).unwrap();
        for kind in IntegralKind::ALL {
            let whole = path.integrate(kind, 0.0, 30.0);
            let parts = path.integrate(kind, 0.0, 11.3) + path.integrate(kind, 11.3, 30.0);
            assert!((whole - parts).abs() < 1e-9);
        }
        assert!((path.integrate(IntegralKind::One, 0.0, 30.0) - 30.0).abs() < 1e-9);
    }

    #[test]
    fn penalized_frozen_subthreshold_forcing() {
        let p = Params::new(1.0, 1.0, 0.5);
        let vs = penalized_frozen_forcing(&p, 1e3, 0.6, 0.0, 5.0, 1e-4);
        // at finite penalty the creep speed is at most |eta| / p
        assert!(vs.iter().all(|v| v.abs() <= 0.6 / 1e3 + 1e-12));
        let vs = penalized_frozen_forcing(&p, 1e3, 0.0, 0.0, 5.0, 1e-4);
        assert!(vs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn penalized_requires_equal_coefficients() {
        let mut rng = replica_rng(0, 0);
        let p = Params::new(1.0, 0.5, 0.5);
        assert!(simulate_penalized_reference(&p, 1e3, 1.0, 1e-3, 1, &mut rng).is_err());
    }

    #[test]
    fn penalized_paths_converge_in_penalty() {
        let p = Params::new(1.0, 1.0, 0.5);
        let run = |pen: f64| {
            let mut rng = replica_rng(17, 0);
            simulate_penalized_reference(&p, pen, 20.0, 1e-5, 1, &mut rng).unwrap().v
        };
        let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let v1 = run(1e3);
        let v4 = run(4e3);
        let v16 = run(1.6e4);
        let d1 = sup(&v1, &v4);
        let d2 = sup(&v4, &v16);
        assert!(d1 > 0.0);
        // the (1/p + 1/q) bound on the squared sup-distance halves the distance
        assert!(d2 <= 0.55 * d1, "d1 {d1} d2 {d2}");
    }
}
