//! Birth-death projection chains of the plus-spin count.
//!
//! A chain is built from a weight table `k -> n F_n(k)` on `{0..n}`; every
//! derived quantity (stationary law, spectral gap, hitting times, TV
//! distance) is computed exactly at finite `n`, in log space where the
//! magnitudes demand it.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{bisect, log_add_exp, log_binomial_row, log_sub_exp, log_sum_exp, sigmoid, KahanSum};
use crate::params::ModelParams;

/// Largest state count accepted by [`exact_gap`].
pub const MAX_GAP_STATES: usize = 20_000;
/// Work cap for [`tv_evolution`], in state-steps summed over starts.
pub const TV_WORK_BUDGET: f64 = 2e10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirthDeathSpec {
    n: usize,
    log_weights: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    r: Vec<f64>,
}

impl BirthDeathSpec {
    /// Chain on `{0..n}` with `n = weights.len() - 1`; `weights[k] = n F_n(k)`.
    pub fn build(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidParameter("need at least two states".into()));
        }
        if let Some(k) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight at k={k} is not finite")));
        }
        let n = weights.len() - 1;
        let nf = n as f64;
        let mut p = vec![0.0; n + 1];
        let mut q = vec![0.0; n + 1];
        let mut r = vec![0.0; n + 1];
        for k in 0..=n {
            if k < n {
                p[k] = (n - k) as f64 / nf * sigmoid(weights[k + 1] - weights[k]);
            }
            if k > 0 {
                q[k] = k as f64 / nf * sigmoid(weights[k - 1] - weights[k]);
            }
            r[k] = 1.0 - p[k] - q[k];
        }
        Ok(Self { n, log_weights: weights, p, q, r })
    }

    /// Projection chain of the annealed measure, `n F_n(k)` from the pairing MGF.
    pub fn annealed(n: usize, params: &ModelParams) -> Result<Self> {
        Self::build(crate::landscape::annealed_log_weights(n, params)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// Expected one-step increment `p(k) - q(k)`.
    pub fn drift_at(&self, k: usize) -> f64 {
        self.p[k] - self.q[k]
    }

    /// One step of the distribution `mu -> mu P`.
    pub fn propagate(&self, mu: &[f64], out: &mut [f64]) {
        let n = self.n;
        for k in 0..=n {
            let mut v = mu[k] * self.r[k];
            if k > 0 {
                v += mu[k - 1] * self.p[k - 1];
            }
            if k < n {
                v += mu[k + 1] * self.q[k + 1];
            }
            out[k] = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryMeasure {
    /// Unnormalised `log pi(k) = log C(n,k) + n (F_n(k) - F_n(0))`.
    pub log_pi: Vec<f64>,
    pub log_nu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl StationaryMeasure {
    pub fn log_min(&self) -> f64 {
        self.log_nu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.log_nu.iter().enumerate() {
            if v > self.log_nu[best] {
                best = k;
            }
        }
        best
    }

    /// Largest relative detailed-balance residual over all edges.
    pub fn detailed_balance_residual(&self, spec: &BirthDeathSpec) -> f64 {
        (0..spec.n)
            .map(|k| {
                let a = self.log_nu[k] + spec.p[k].ln();
                let b = self.log_nu[k + 1] + spec.q[k + 1].ln();
                (a - b).exp_m1().abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn stationary(spec: &BirthDeathSpec) -> StationaryMeasure {
    let binom = log_binomial_row(spec.n);
    let w0 = spec.log_weights[0];
    let log_pi: Vec<f64> = binom.iter().zip(&spec.log_weights).map(|(c, w)| c + (w - w0)).collect();
    let total = log_sum_exp(&log_pi);
    let log_nu: Vec<f64> = log_pi.iter().map(|x| x - total).collect();
    let nu = log_nu.iter().map(|x| x.exp()).collect();
    StationaryMeasure { log_pi, log_nu, nu }
}

/// Cumulative `log nu([0, k])` for every `k`.
fn log_prefix_mass(log_nu: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(log_nu.len());
    let mut acc = f64::NEG_INFINITY;
    for &x in log_nu {
        acc = log_add_exp(acc, x);
        out.push(acc);
    }
    out
}

fn log_suffix_mass(log_nu: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; log_nu.len()];
    let mut acc = f64::NEG_INFINITY;
    for k in (0..log_nu.len()).rev() {
        acc = log_add_exp(acc, log_nu[k]);
        out[k] = acc;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChenBounds {
    pub median: usize,
    pub log_ell: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Two-sided spectral-gap bounds `1/(4 l(i0)) <= gamma <= 2/l(i0)` at the
/// median state `i0`.
pub fn chen_gap_bounds(spec: &BirthDeathSpec) -> ChenBounds {
    let st = stationary(spec);
    let prefix = log_prefix_mass(&st.log_nu);
    let suffix = log_suffix_mass(&st.log_nu);
    let half = 0.5f64.ln();
    let i0 = prefix.iter().position(|&m| m >= half).unwrap_or(spec.n);

    let mut log_ell = f64::NEG_INFINITY;
    // left: max_{j < i0} nu([0,j]) sum_{k=j}^{i0-1} 1/(nu(k) p(k))
    let mut acc = f64::NEG_INFINITY;
    for j in (0..i0).rev() {
        acc = log_add_exp(acc, -st.log_nu[j] - spec.p[j].ln());
        log_ell = log_ell.max(prefix[j] + acc);
    }
    // right: max_{j > i0} nu([j,n]) sum_{k=i0+1}^{j} 1/(nu(k) q(k))
    let mut acc = f64::NEG_INFINITY;
    for j in i0 + 1..=spec.n {
        acc = log_add_exp(acc, -st.log_nu[j] - spec.q[j].ln());
        log_ell = log_ell.max(suffix[j] + acc);
    }
    ChenBounds {
        median: i0,
        log_ell,
        lower: 0.25 * (-log_ell).exp(),
        upper: 2.0 * (-log_ell).exp(),
    }
}

/// Number of eigenvalues of `I - P` strictly below `mu`, from the pivots of
/// the symmetric tridiagonal `LDL^T` factorisation of `I - P - mu`. The
/// pivots are written as `p(k) + e(k)`, where `e` obeys a recursion free of
/// the cancellation that would otherwise swamp gaps far below machine
/// precision.
fn count_below(spec: &BirthDeathSpec, mu: f64) -> usize {
    let mut count = 0;
    let mut e = -mu;
    let mut pivot = spec.p[0] + e;
    if pivot < 0.0 {
        count += 1;
    }
    for k in 1..=spec.n {
        let prev = if pivot == 0.0 { f64::MIN_POSITIVE } else { pivot };
        e = -mu + spec.q[k] * e / prev;
        pivot = spec.p[k] + e;
        if pivot < 0.0 {
            count += 1;
        }
    }
    count
}

/// Spectral gap `1 - lambda_2` by Sturm bisection, to relative precision.
/// Gaps below `1e-300` are reported as `1e-300`.
pub fn exact_gap(spec: &BirthDeathSpec) -> Result<f64> {
    if spec.n + 1 > MAX_GAP_STATES {
        return Err(Error::Budget(format!("exact_gap supports at most {MAX_GAP_STATES} states")));
    }
    let f = |mu: f64| count_below(spec, mu) as f64 - 1.5;
    let lo = 1e-300;
    if f(lo) > 0.0 {
        return Ok(lo);
    }
    Ok(bisect(f, lo, 2.0 + 1e-9).expect("second eigenvalue of I - P lies in (0, 2]"))
}

/// All eigenvalues of `P` in decreasing order, by Sturm bisection on each
/// index.
pub fn eigenvalues(spec: &BirthDeathSpec) -> Result<Vec<f64>> {
    if spec.n + 1 > MAX_GAP_STATES {
        return Err(Error::Budget(format!("eigenvalues supports at most {MAX_GAP_STATES} states")));
    }
    let out = (1..=spec.n)
        .into_par_iter()
        .map(|idx| {
            let f = |mu: f64| count_below(spec, mu) as f64 - (idx as f64 + 0.5);
            1.0 - bisect(f, 1e-300, 2.0 + 1e-9).unwrap_or(0.0)
        })
        .collect::<Vec<_>>();
    let mut all = vec![1.0];
    all.extend(out);
    Ok(all)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `(1/gamma - 1) log 2 <= t_mix <= log(4 / min nu) / gamma`.
pub fn mixing_bounds_from_gap(gamma: f64, min_nu: f64) -> Result<MixingBounds> {
    if !(min_nu > 0.0 && min_nu < 1.0) {
        return Err(Error::InvalidParameter(format!("min_nu must lie in (0,1), got {min_nu}")));
    }
    mixing_bounds_from_gap_log(gamma, min_nu.ln())
}

/// As [`mixing_bounds_from_gap`] with `log min nu`, for measures whose
/// smallest mass underflows.
pub fn mixing_bounds_from_gap_log(gamma: f64, log_min_nu: f64) -> Result<MixingBounds> {
    if !(gamma > 0.0 && gamma <= 1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0,1], got {gamma}")));
    }
    Ok(MixingBounds {
        lower: (1.0 / gamma - 1.0).max(0.0) * std::f64::consts::LN_2,
        upper: (4f64.ln() - log_min_nu) / gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bottleneck {
    pub phi: f64,
    pub log_phi: f64,
    /// `nu(S)`.
    pub mass: f64,
    /// `nu(S) <= 1/2`, as required for the mixing lower bound.
    pub admissible: bool,
}

impl Bottleneck {
    /// `t_mix >= (1/(2 Phi) - 1) log 2`, in log form when `Phi` is tiny.
    pub fn mixing_lower_bound(&self) -> f64 {
        (0.5 / self.phi - 1.0) * std::f64::consts::LN_2
    }
}

/// Bottleneck ratio of the prefix `{0..m}`; the only edge leaving it is
/// `m -> m+1`, so `Q(S, S^c) = nu(m) p(m)`.
pub fn bottleneck(spec: &BirthDeathSpec, m: usize) -> Result<Bottleneck> {
    if m >= spec.n {
        return Err(Error::InvalidParameter(format!("prefix cutoff {m} must be below n = {}", spec.n)));
    }
    let st = stationary(spec);
    let log_mass = log_prefix_mass(&st.log_nu)[m];
    let log_phi = st.log_nu[m] + spec.p[m].ln() - log_mass;
    let mass = log_mass.exp();
    Ok(Bottleneck { phi: log_phi.exp(), log_phi, mass, admissible: mass <= 0.5 })
}

/// `Phi* = min { Phi(S) : nu(S) <= 1/2 }` over all subsets of `{0..n}`.
pub fn brute_force_bottleneck(spec: &BirthDeathSpec) -> Result<f64> {
    if spec.n > 12 {
        return Err(Error::Budget(format!("brute force bottleneck needs n <= 12, got {}", spec.n)));
    }
    let st = stationary(spec);
    let flow: Vec<f64> = (0..spec.n).map(|k| st.nu[k] * spec.p[k]).collect();
    let states = spec.n + 1;
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << states) - 1 {
        let mass: f64 = (0..states).filter(|k| mask >> k & 1 == 1).map(|k| st.nu[k]).sum();
        if mass > 0.5 {
            continue;
        }
        let out: f64 = (0..spec.n).filter(|&k| (mask >> k & 1) != (mask >> (k + 1) & 1)).map(|k| flow[k]).sum();
        best = best.min(out / mass);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingTime {
    pub from: usize,
    pub to: usize,
    pub log_mean: f64,
    /// Log of the passage-time variance; `-inf` for `from == to`.
    pub log_variance: f64,
}

impl HittingTime {
    pub fn mean(&self) -> f64 {
        self.log_mean.exp()
    }

    pub fn variance(&self) -> f64 {
        self.log_variance.exp()
    }
}

/// `log E tau_{k -> k+1}` for every `k < n`.
fn log_up_steps(spec: &BirthDeathSpec, st: &StationaryMeasure) -> Vec<f64> {
    let prefix = log_prefix_mass(&st.log_pi);
    (0..spec.n).map(|k| prefix[k] - st.log_pi[k] - spec.p[k].ln()).collect()
}

/// `log E tau_{k -> k-1}` at index `k`, for every `k >= 1` (index 0 unused).
fn log_down_steps(spec: &BirthDeathSpec, st: &StationaryMeasure) -> Vec<f64> {
    let suffix = log_suffix_mass(&st.log_pi);
    let mut out = vec![f64::NAN; spec.n + 1];
    for k in 1..=spec.n {
        out[k] = suffix[k] - st.log_pi[k] - spec.q[k].ln();
    }
    out
}

/// Exact mean of the first passage from `from` to `to`. Passages decompose
/// into independent single-level steps, so means add and so do variances.
pub fn expected_hitting(spec: &BirthDeathSpec, from: usize, to: usize) -> Result<HittingTime> {
    hitting_impl(spec, from, to, false)
}

/// As [`expected_hitting`], additionally evaluating the exact variance.
pub fn hitting_with_variance(spec: &BirthDeathSpec, from: usize, to: usize) -> Result<HittingTime> {
    hitting_impl(spec, from, to, true)
}

fn hitting_impl(spec: &BirthDeathSpec, from: usize, to: usize, variance: bool) -> Result<HittingTime> {
    for v in [from, to] {
        if v > spec.n {
            return Err(Error::VertexOutOfRange { vertex: v, n: spec.n + 1 });
        }
    }
    let empty = HittingTime { from, to, log_mean: f64::NEG_INFINITY, log_variance: f64::NEG_INFINITY };
    if from == to {
        return Ok(empty);
    }
    let st = stationary(spec);
    if from < to {
        let steps = log_up_steps(spec, &st);
        let log_mean = log_sum_exp(&steps[from..to]);
        let log_variance = if variance {
            let vars: Vec<f64> = (from..to).map(|k| log_step_variance_up(spec, &st, &steps, k)).collect();
            log_sum_exp(&vars)
        } else {
            f64::NAN
        };
        Ok(HittingTime { from, to, log_mean, log_variance })
    } else {
        let steps = log_down_steps(spec, &st);
        let log_mean = log_sum_exp(&steps[to + 1..=from]);
        let log_variance = if variance {
            let vars: Vec<f64> = (to + 1..=from).map(|k| log_step_variance_down(spec, &st, &steps, k)).collect();
            log_sum_exp(&vars)
        } else {
            f64::NAN
        };
        Ok(HittingTime { from, to, log_mean, log_variance })
    }
}

/// `Var tau_{k -> k+1}` from
/// `E tau^2 = 2/(p(k) pi(k)) sum_{j<=k} pi(j) E tau_{j -> k+1} - E tau_{k -> k+1}`.
fn log_step_variance_up(spec: &BirthDeathSpec, st: &StationaryMeasure, steps: &[f64], k: usize) -> f64 {
    // E tau_{j -> k+1} = sum_{i=j}^{k} E tau_{i -> i+1}
    let mut to_target = f64::NEG_INFINITY;
    let mut weighted = f64::NEG_INFINITY;
    for j in (0..=k).rev() {
        to_target = log_add_exp(to_target, steps[j]);
        weighted = log_add_exp(weighted, st.log_pi[j] + to_target);
    }
    let log_second = log_sub_exp(2f64.ln() - spec.p[k].ln() - st.log_pi[k] + weighted, steps[k]);
    log_sub_exp(log_second, 2.0 * steps[k])
}

fn log_step_variance_down(spec: &BirthDeathSpec, st: &StationaryMeasure, steps: &[f64], k: usize) -> f64 {
    let mut to_target = f64::NEG_INFINITY;
    let mut weighted = f64::NEG_INFINITY;
    for j in k..=spec.n {
        to_target = log_add_exp(to_target, steps[j]);
        weighted = log_add_exp(weighted, st.log_pi[j] + to_target);
    }
    let log_second = log_sub_exp(2f64.ln() - spec.q[k].ln() - st.log_pi[k] + weighted, steps[k]);
    log_sub_exp(log_second, 2.0 * steps[k])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TvStart {
    State(usize),
    /// Worst case over the two extreme states `{0, n}`.
    Extremes,
    /// Worst case over every state.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TVCurve {
    pub start: TvStart,
    pub times: Vec<usize>,
    pub dist: Vec<f64>,
    /// First recorded time with `dist <= 1/4`.
    pub t_mix_quarter: Option<usize>,
    /// Interpolated `t_mix(1/4) - t_mix(3/4)`.
    pub window: Option<f64>,
    /// Start attaining the worst TV at `t_mix_quarter` (or at the last time).
    pub worst_state: usize,
}

impl TVCurve {
    /// First recorded time with `dist <= eps`.
    pub fn t_mix(&self, eps: f64) -> Option<usize> {
        self.times.iter().zip(&self.dist).find(|(_, &d)| d <= eps).map(|(&t, _)| t)
    }

    /// Crossing of level `eps`, linearly interpolated between the recorded
    /// times bracketing the first recorded value `<= eps`.
    pub fn crossing(&self, eps: f64) -> Option<f64> {
        let i = self.dist.iter().position(|&d| d <= eps)?;
        if i == 0 {
            return Some(self.times[0] as f64);
        }
        let (t0, t1) = (self.times[i - 1] as f64, self.times[i] as f64);
        let (d0, d1) = (self.dist[i - 1], self.dist[i]);
        Some(if d0 == d1 { t1 } else { t0 + (d0 - eps) / (d0 - d1) * (t1 - t0) })
    }
}

fn tv_distance(mu: &[f64], nu: &[f64]) -> f64 {
    let mut acc = KahanSum::default();
    for (a, b) in mu.iter().zip(nu) {
        acc.add((a - b).abs());
    }
    (0.5 * acc.total()).min(1.0)
}

/// TV distance to stationarity from one deterministic start, recorded at
/// `t = 0, stride, 2 stride, ...` up to `horizon`. Stops early once the
/// distance falls below `stop_below`.
fn tv_single(spec: &BirthDeathSpec, nu: &[f64], start: usize, horizon: usize, stride: usize, stop_below: f64) -> Vec<f64> {
    let mut mu = vec![0.0; spec.n + 1];
    mu[start] = 1.0;
    let mut next = vec![0.0; spec.n + 1];
    let mut out = vec![tv_distance(&mu, nu)];
    for t in 1..=horizon {
        spec.propagate(&mu, &mut next);
        std::mem::swap(&mut mu, &mut next);
        if t % stride == 0 {
            let d = tv_distance(&mu, nu);
            out.push(d);
            if d < stop_below {
                break;
            }
        }
    }
    out
}

/// Exact TV evolution. The recorded grid is `t = 0, stride, ...`; for the
/// worst-case starts the pointwise maximum over starts is reported.
pub fn tv_evolution(spec: &BirthDeathSpec, start: TvStart, horizon: usize, stride: usize) -> Result<TVCurve> {
    tv_evolution_until(spec, start, horizon, stride, 0.0)
}

/// As [`tv_evolution`], stopping once every start is below `stop_below`.
pub fn tv_evolution_until(
    spec: &BirthDeathSpec,
    start: TvStart,
    horizon: usize,
    stride: usize,
    stop_below: f64,
) -> Result<TVCurve> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be positive".into()));
    }
    let starts: Vec<usize> = match start {
        TvStart::State(k) if k > spec.n => return Err(Error::VertexOutOfRange { vertex: k, n: spec.n + 1 }),
        TvStart::State(k) => vec![k],
        TvStart::Extremes => vec![0, spec.n],
        TvStart::All => (0..=spec.n).collect(),
    };
    let work = (spec.n + 1) as f64 * horizon as f64 * starts.len() as f64;
    if work > TV_WORK_BUDGET {
        return Err(Error::Budget(format!("TV evolution needs {work:.2e} state-steps (cap {TV_WORK_BUDGET:.0e})")));
    }
    let st = stationary(spec);
    let curves: Vec<Vec<f64>> =
        starts.par_iter().map(|&s| tv_single(spec, &st.nu, s, horizon, stride, stop_below)).collect();
    let len = curves.iter().map(Vec::len).max().unwrap_or(1);
    // a curve that stopped early stays below stop_below afterwards
    let value = |c: &Vec<f64>, i: usize| c.get(i).copied().unwrap_or(*c.last().unwrap());
    let mut dist = Vec::with_capacity(len);
    let mut argmax = Vec::with_capacity(len);
    for i in 0..len {
        let (who, d) = curves
            .iter()
            .enumerate()
            .map(|(j, c)| (j, value(c, i)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        dist.push(d);
        argmax.push(starts[who]);
    }
    let times: Vec<usize> = (0..len).map(|i| i * stride).collect();
    let mut curve = TVCurve { start, times, dist, t_mix_quarter: None, window: None, worst_state: starts[0] };
    curve.t_mix_quarter = curve.t_mix(0.25);
    curve.window = match (curve.crossing(0.25), curve.crossing(0.75)) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    let idx = curve.t_mix_quarter.map(|t| t / stride).unwrap_or(len - 1);
    curve.worst_state = argmax[idx];
    Ok(curve)
}

/// Default recording stride `max(1, n/8)`.
pub fn default_stride(n: usize) -> usize {
    (n / 8).max(1)
}

/// Limiting drift `R(s) = e^{F'(s)} / (e^{F'(s)} + 1) - s`.
pub fn drift<F: Fn(f64) -> f64>(s: f64, f_prime: F) -> f64 {
    sigmoid(f_prime(s)) - s
}

/// Cut-off constant `c* = (2 s* (1 - s*) |G''(s*)|)^{-1}`.
pub fn cutoff_constant(s_star: f64, g_second: f64) -> Result<f64> {
    if g_second.is_nan() || g_second >= 0.0 {
        return Err(Error::Regime(format!("G''(s*) must be negative, got {g_second}")));
    }
    if !(s_star > 0.0 && s_star < 1.0) {
        return Err(Error::InvalidParameter(format!("s* must lie in (0,1), got {s_star}")));
    }
    Ok(1.0 / (2.0 * s_star * (1.0 - s_star) * g_second.abs()))
}

/// `c*` of the annealed landscape in the unimodal regime, at its maximiser.
pub fn annealed_cutoff_constant(p: &ModelParams) -> Result<f64> {
    let report = crate::landscape::critical_points(p);
    if report.criticals.len() != 1 {
        return Err(Error::Regime("cut-off constant needs a unimodal landscape".into()));
    }
    let s = report.criticals[0].t;
    cutoff_constant(s, crate::landscape::phi_hat_second(s, p))
}
