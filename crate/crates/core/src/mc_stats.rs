//! Ratio estimators, duration histograms and density-at-zero estimates built
//! from i.i.d. excursions.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::IntegralKind;
use crate::model::Params;
use crate::noise_chain::alpha_at;
use crate::sim::Excursion;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub value: f64,
    pub stderr: f64,
    pub lo95: f64,
    pub hi95: f64,
    pub n: usize,
}

impl EstimateWithCI {
    pub fn new(value: f64, stderr: f64, n: usize) -> Self {
        Self {
            value,
            stderr,
            lo95: value - Z95 * stderr,
            hi95: value + Z95 * stderr,
            n,
        }
    }

    pub fn covers(&self, x: f64) -> bool {
        self.lo95 <= x && x <= self.hi95
    }

    /// Whether `|value - x| <= k * stderr`.
    pub fn within_sigmas(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.stderr
    }
}

/// Streaming first and second moments of `(X, Y)` pairs; merges exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RatioAccumulator {
    n: usize,
    mean_x: f64,
    mean_y: f64,
    m2_x: f64,
    m2_y: f64,
    c_xy: f64,
}

impl RatioAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.m2_x += dx * (x - self.mean_x);
        self.m2_y += dy * (y - self.mean_y);
        self.c_xy += dx * (y - self.mean_y);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        self.m2_x += other.m2_x + dx * dx * na * nb / n;
        self.m2_y += other.m2_y + dy * dy * na * nb / n;
        self.c_xy += other.c_xy + dx * dy * na * nb / n;
        self.mean_x += dx * nb / n;
        self.mean_y += dy * nb / n;
        self.n += other.n;
    }

    /// `mean(X) / mean(Y)` with a delta-method standard error.
    pub fn estimate(&self) -> Result<EstimateWithCI> {
        if self.n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: self.n });
        }
        if self.mean_y == 0.0 {
            return Err(Error::ZeroDenominator);
        }
        let n = self.n as f64;
        let (vx, vy, cxy) = (self.m2_x / n, self.m2_y / n, self.c_xy / n);
        let gx = 1.0 / self.mean_y;
        let gy = -self.mean_x / (self.mean_y * self.mean_y);
        let var = (gx * gx * vx + 2.0 * gx * gy * cxy + gy * gy * vy).max(0.0);
        Ok(EstimateWithCI::new(self.mean_x / self.mean_y, (var / n).sqrt(), self.n))
    }
}

pub fn ratio_estimate(x: &[f64], y: &[f64]) -> Result<EstimateWithCI> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let mut acc = RatioAccumulator::new();
    for (&a, &b) in x.iter().zip(y) {
        acc.push(a, b);
    }
    acc.estimate()
}

/// Plain sample mean with a `1/sqrt(n)` standard error.
pub fn mean_estimate(x: &[f64]) -> Result<EstimateWithCI> {
    ratio_estimate(x, &vec![1.0; x.len()])
}

/// The four stationary statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Statistic {
    /// Probability of sticking.
    S1,
    /// `E[v^2]`.
    S2,
    /// `P(|eta| <= mu_s)`.
    S3,
    /// `E[eta^2]`.
    S4,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Statistic::S1, Statistic::S2, Statistic::S3, Statistic::S4];

    pub fn kind(self) -> IntegralKind {
        match self {
            Statistic::S1 => IntegralKind::StickIndicator,
            Statistic::S2 => IntegralKind::VSquared,
            Statistic::S3 => IntegralKind::BandIndicator,
            Statistic::S4 => IntegralKind::EtaSquared,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Statistic::S1 => "S1",
            Statistic::S2 => "S2",
            Statistic::S3 => "S3",
            Statistic::S4 => "S4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Statistic::S1 => "p_stick",
            Statistic::S2 => "mean_v_squared",
            Statistic::S3 => "p_band",
            Statistic::S4 => "mean_eta_squared",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name().eq_ignore_ascii_case(s))
    }
}

/// Ratio estimate of `integral(kind) / tau1` over the excursions.
pub fn excursion_ratio(excursions: &[Excursion], kind: IntegralKind) -> Result<EstimateWithCI> {
    let mut acc = RatioAccumulator::new();
    for e in excursions {
        acc.push(e.integral(kind), e.tau1);
    }
    acc.estimate()
}

/// S1..S4 from i.i.d. excursions. All four functionals are even under the
/// reflection symmetry, so excursions from `s+` alone are enough.
pub fn stationary_statistics(excursions: &[Excursion]) -> Result<BTreeMap<Statistic, EstimateWithCI>> {
    Statistic::ALL
        .into_iter()
        .map(|s| Ok((s, excursion_ratio(excursions, s.kind())?)))
        .collect()
}

/// Fraction of time spent sliding, `E[tau_hat1] / E[tau1]`.
pub fn dynamic_fraction(excursions: &[Excursion]) -> Result<EstimateWithCI> {
    let mut acc = RatioAccumulator::new();
    for e in excursions {
        acc.push(e.tau_hat1, e.tau1);
    }
    acc.estimate()
}

/// Uniform-bin histogram of nonnegative durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationHistogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    /// Samples at or beyond `hi`.
    pub tail: u64,
    /// Samples below `lo`.
    pub below: u64,
    pub total: u64,
}

impl DurationHistogram {
    pub fn new(lo: f64, hi: f64, nbins: usize) -> Result<Self> {
        if !(hi > lo) || nbins == 0 {
            return Err(Error::Domain(format!("bad histogram range [{lo}, {hi}) with {nbins} bins")));
        }
        Ok(Self { lo, hi, counts: vec![0; nbins], tail: 0, below: 0, total: 0 })
    }

    pub fn from_samples(samples: &[f64], lo: f64, hi: f64, nbins: usize) -> Result<Self> {
        let mut h = Self::new(lo, hi, nbins)?;
        samples.iter().for_each(|&x| h.push(x));
        Ok(h)
    }

    pub fn nbins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.nbins() as f64
    }

    pub fn push(&mut self, x: f64) {
        self.total += 1;
        if x < self.lo {
            self.below += 1;
            return;
        }
        let k = ((x - self.lo) / self.bin_width()) as usize;
        match self.counts.get_mut(k) {
            Some(c) if x < self.hi => *c += 1,
            _ => self.tail += 1,
        }
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.lo != other.lo || self.hi != other.hi || self.nbins() != other.nbins() {
            return Err(Error::Domain("merging histograms with different bins".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.tail += other.tail;
        self.below += other.below;
        self.total += other.total;
        Ok(())
    }

    pub fn edges(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..=self.nbins()).map(|k| self.lo + k as f64 * w).collect()
    }

    /// Counts normalized by the total sample size, so that the integral over
    /// the range plus the out-of-range mass is one.
    pub fn densities(&self) -> Vec<f64> {
        let scale = 1.0 / (self.total.max(1) as f64 * self.bin_width());
        self.counts.iter().map(|&c| c as f64 * scale).collect()
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail as f64 / self.total.max(1) as f64
    }

    pub fn out_of_range_mass(&self) -> f64 {
        (self.tail + self.below) as f64 / self.total.max(1) as f64
    }

    /// Columns `bin_lo,bin_hi,density`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_lo,bin_hi,density")?;
        let edges = self.edges();
        for (k, d) in self.densities().iter().enumerate() {
            writeln!(out, "{:.12e},{:.12e},{:.12e}", edges[k], edges[k + 1], d)?;
        }
        Ok(())
    }
}

/// Histograms of the three phase durations of an excursion.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationHistograms {
    pub stick: DurationHistogram,
    pub slide: DurationHistogram,
    pub excursion: DurationHistogram,
}

/// Empirical `q`-quantile (nearest rank).
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let k = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len().max(1)) - 1;
    s.get(k).copied().unwrap_or(0.0)
}

/// Upper histogram bound used when none is given.
pub const DEFAULT_UPPER_QUANTILE: f64 = 0.995;

/// Histograms of stick (`tau1 - tau_hat1`), slide (`tau_hat1`) and excursion
/// (`tau1`) durations on `[0, upper)`. Without an explicit upper bound each
/// histogram spans up to its own 99.5% quantile.
pub fn duration_histograms(excursions: &[Excursion], nbins: usize, upper: Option<f64>) -> Result<DurationHistograms> {
    if excursions.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let stick: Vec<f64> = excursions.iter().map(|e| e.stick_duration()).collect();
    let slide: Vec<f64> = excursions.iter().map(|e| e.slide_duration()).collect();
    let total: Vec<f64> = excursions.iter().map(|e| e.tau1).collect();
    let build = |x: &[f64]| {
        let hi = upper.unwrap_or_else(|| quantile(x, DEFAULT_UPPER_QUANTILE));
        DurationHistogram::from_samples(x, 0.0, hi, nbins)
    };
    Ok(DurationHistograms {
        stick: build(&stick)?,
        slide: build(&slide)?,
        excursion: build(&total)?,
    })
}

/// Density at `0+` from the first bins of a histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Estimate {
    /// First-bin density.
    pub first_bin: f64,
    /// Standard error of `first_bin`, treating the bin count as Poisson.
    pub first_bin_stderr: f64,
    /// Linear extrapolation to 0 through the first two bin centres.
    pub linear: f64,
    /// Standard error of `linear`, treating the bin counts as Poisson.
    pub linear_stderr: f64,
}

pub fn f0_estimate(hist: &DurationHistogram) -> Result<F0Estimate> {
    let d = hist.densities();
    if d.len() < 2 || hist.counts[0] == 0 {
        return Err(Error::EmptyBins);
    }
    let scale = 1.0 / (hist.total as f64 * hist.bin_width());
    let var = (2.25 * hist.counts[0] as f64 + 0.25 * hist.counts[1] as f64) * scale * scale;
    Ok(F0Estimate {
        first_bin: d[0],
        first_bin_stderr: (hist.counts[0] as f64).sqrt() * scale,
        linear: 1.5 * d[0] - 0.5 * d[1],
        linear_stderr: var.sqrt(),
    })
}

/// Density at `0+` from a two-bin histogram of width `bin_width` on `[0, 2 bin_width)`.
pub fn f0_from_samples(samples: &[f64], bin_width: f64) -> Result<F0Estimate> {
    f0_estimate(&DurationHistogram::from_samples(samples, 0.0, 2.0 * bin_width, 2)?)
}

/// Stick density at `0+` averaged over the static entry node: only the two
/// edge nodes of the band can be left by a single jump.
pub fn stick_f0_from_entries(excursions: &[Excursion], params: &Params) -> Result<EstimateWithCI> {
    let k = params.lattice().k_mu_s;
    let rate = params.jump_rate();
    let up = rate * alpha_at(k, params);
    let down = rate * (1.0 - alpha_at(-k, params));
    let x: Vec<f64> = excursions
        .iter()
        .map(|e| match e.entry_index {
            i if i == k => up,
            i if i == -k => down,
            _ => 0.0,
        })
        .collect();
    mean_estimate(&x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    /// Largest gap between the two empirical distribution functions.
    pub statistic: f64,
    /// Asymptotic p-value.
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let lam = (ne + 0.12 + 0.11 / ne) * d;
    Ok(KsTest { statistic: d, p_value: kolmogorov_tail(lam) })
}

/// `P(K > lam)` for the Kolmogorov distribution.
fn kolmogorov_tail(lam: f64) -> f64 {
    if lam < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lam * lam).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Columns `name,value,stderr,lo95,hi95,n`.
pub fn write_statistics_csv<W: Write>(mut out: W, rows: &[(String, EstimateWithCI)]) -> std::io::Result<()> {
    writeln!(out, "name,value,stderr,lo95,hi95,n")?;
    for (name, e) in rows {
        writeln!(out, "{},{:.12e},{:.12e},{:.12e},{:.12e},{}", name, e.value, e.stderr, e.lo95, e.hi95, e.n)?;
    }
    Ok(())
}

/// Averaged periodogram of an evenly sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    /// Angular frequencies `2 pi k / (segment dt)`, `k = 0..=segment/2`.
    pub omega: Vec<f64>,
    /// Two-sided density, comparable with `int C(t) exp(-i omega t) dt`.
    pub power: Vec<f64>,
    pub segments: usize,
}

impl Periodogram {
    /// Mean power over `omega` in `[lo, hi]`.
    pub fn band_mean(&self, lo: f64, hi: f64) -> Option<f64> {
        let sel: Vec<f64> = self
            .omega
            .iter()
            .zip(&self.power)
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .map(|(_, p)| *p)
            .collect();
        (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
    }
}

/// Welch estimate: Hann-windowed segments with 50% overlap, each centred
/// on its own mean.
pub fn welch_psd(x: &[f64], dt: f64, segment: usize) -> Result<Periodogram> {
    if segment < 4 {
        return Err(Error::Domain(format!("segment length {segment} too short")));
    }
    if x.len() < segment {
        return Err(Error::TooFewSamples { needed: segment, got: x.len() });
    }
    let window: Vec<f64> = (0..segment)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / segment as f64).cos())
        .collect();
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let fft = rustfft::FftPlanner::<f64>::new().plan_fft_forward(segment);
    let half = segment / 2;
    let step = segment / 2;
    let mut power = vec![0.0; half + 1];
    let mut segments = 0;
    let mut buf = vec![Complex64::new(0.0, 0.0); segment];
    let mut start = 0;
    while start + segment <= x.len() {
        let chunk = &x[start..start + segment];
        let mean = chunk.iter().sum::<f64>() / segment as f64;
        buf.iter_mut()
            .zip(chunk.iter().zip(&window))
            .for_each(|(b, (v, w))| *b = Complex64::new((v - mean) * w, 0.0));
        fft.process(&mut buf);
        power.iter_mut().zip(&buf).for_each(|(p, z)| *p += z.norm_sqr());
        segments += 1;
        start += step;
    }
    let scale = dt / (w2 * segments as f64);
    power.iter_mut().for_each(|p| *p *= scale);
    let omega = (0..=half)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / (segment as f64 * dt))
        .collect();
    Ok(Periodogram { omega, power, segments })
}
