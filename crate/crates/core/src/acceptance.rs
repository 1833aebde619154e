//! Acceptance criteria A1-A14 with pinned tolerances.
//!
//! Each criterion is an exact finite-`n` or property-based stand-in for an
//! asymptotic statement. [`run_all`] returns machine-readable verdicts.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{
    brute_force_bottleneck, chen_gap_bounds, cutoff_constant, drift, exact_gap, expected_hitting, tv_evolution_until,
    BirthDeathSpec, TvStart,
};
use crate::error::{Error, Result};
use crate::glauber::{curie_weiss_full_chain, hitting_time_fresh_graphs, majority_threshold, SimConfig};
use crate::graph::{sample_configuration_model, sample_simple};
use crate::landscape::{annealed_bc, annealed_log_weights, barrier_lambda, critical_points, exact_fn, f_limit, phi_hat_second};
use crate::numerics::{median, ols_slope};
use crate::params::{critical_beta, ModelParams};
use crate::quenched::{all_ratio_checks, fixed_spin_partition, isoperimetric_separation, vertex_add_bounds_check};
use crate::tree::{influence_decay, map_r_to_t, root_magnetization, tree_critical_field, tree_fixed_points, Boundary, LeafState};

pub const CRITERIA: [&str; 14] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11", "A12", "A13", "A14"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptanceOptions {
    /// Added to the annealed critical field in A1; a nonzero value such as
    /// `1e-2` makes A1 fail on purpose.
    pub bc_perturbation: f64,
    pub seed: u64,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self { bc_perturbation: 0.0, seed: 20_240_601 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub id: String,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "{:<4} {} {}: {} [{:.1} s]",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.seconds
        )
    }
}

fn title(id: &str) -> &'static str {
    match id {
        "A1" => "critical-field identity",
        "A2" => "weight convergence rate",
        "A3" => "spectral sandwich",
        "A4" => "bottleneck sandwich",
        "A5" => "projection gap identity",
        "A6" => "metastable exponent",
        "A7" => "barrier plateau in beta",
        "A8" => "cut-off location and window",
        "A9" => "Curie-Weiss cut-off constant",
        "A10" => "quenched inequalities",
        "A11" => "tree spatial-mixing rate",
        "A12" => "minus-boundary correspondence",
        "A13" => "isoperimetric separation",
        "A14" => "quenched metastability",
        _ => "unknown",
    }
}

/// Runs one criterion by id.
pub fn run_criterion(id: &str, opts: &AcceptanceOptions) -> Result<Verdict> {
    let start = Instant::now();
    let (pass, detail) = match id {
        "A1" => a1(opts),
        "A2" => a2(),
        "A3" => a3(opts),
        "A4" => a4(opts),
        "A5" => a5(),
        "A6" => a6(),
        "A7" => a7(),
        "A8" => a8(),
        "A9" => a9(),
        "A10" => a10(opts),
        "A11" => a11(),
        "A12" => a12(),
        "A13" => a13(opts),
        "A14" => a14(opts),
        other => return Err(Error::InvalidParameter(format!("unknown criterion '{other}'"))),
    }?;
    Ok(Verdict { id: id.to_string(), title: title(id).to_string(), pass, detail, seconds: start.elapsed().as_secs_f64() })
}

pub fn run_all(opts: &AcceptanceOptions) -> Result<Vec<Verdict>> {
    CRITERIA.iter().map(|id| run_criterion(id, opts)).collect()
}

fn params(d: usize, beta: f64, field: f64) -> ModelParams {
    ModelParams::new(d, beta, field).expect("criterion parameters are valid")
}

/// Birth-death chain whose log-weights follow a random walk with uniform
/// steps in `[-3, 3]`.
pub fn random_chain(n: usize, seed: u64) -> Result<BirthDeathSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = 0.0;
    let weights = (0..=n)
        .map(|_| {
            w += rng.gen_range(-3.0..3.0);
            w
        })
        .collect();
    BirthDeathSpec::build(weights)
}

fn a1(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for d in [3, 4, 5] {
        for shift in [0.2, 1.0] {
            let p = params(d, critical_beta(d) + shift, 0.0);
            let diff = (annealed_bc(&p) + opts.bc_perturbation - tree_critical_field(&p)).abs();
            worst = worst.max(diff);
        }
    }
    Ok((worst <= 1e-6, format!("max |B_hat_c - B_c^G| = {worst:.3e} (tol 1e-6)")))
}

fn a2() -> Result<(bool, String)> {
    let p = params(3, 1.0, 0.1);
    let err = |n: usize| -> Result<f64> {
        let w = annealed_log_weights(n, &p)?;
        Ok((0..=n).map(|k| (w[k] / n as f64 - f_limit(k as f64 / n as f64, &p)).abs()).fold(0.0, f64::max))
    };
    let errors = [err(100)?, err(200)?, err(400)?];
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    let pass = ratios.iter().all(|r| (1.6..=2.4).contains(r));
    Ok((pass, format!("sup errors {}, ratios {ratios:.3?} (need [1.6, 2.4])", sci(&errors))))
}

fn a3(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut chains = Vec::new();
    for i in 0..50 {
        chains.push(random_chain(60, opts.seed.wrapping_add(i))?);
    }
    let annealed = [
        (3, 0.3, 0.0, 60),
        (3, 1.0, 0.0, 80),
        (3, 1.2, 0.05, 100),
        (3, 1.5, 0.3, 60),
        (4, 0.5, 0.1, 90),
        (4, 1.0, 0.0, 120),
        (4, 2.0, 0.5, 70),
        (5, 0.8, 0.2, 60),
        (5, 1.4, 0.0, 150),
        (3, 2.5, 1.0, 200),
    ];
    for (d, beta, b, n) in annealed {
        chains.push(BirthDeathSpec::annealed(n, &params(d, beta, b))?);
    }
    let mut violations = 0;
    let (mut above_lower, mut below_upper) = (f64::INFINITY, f64::INFINITY);
    for spec in &chains {
        let g = exact_gap(spec)?;
        let b = chen_gap_bounds(spec);
        if !(b.lower <= g * (1.0 + 1e-12) && g <= b.upper * (1.0 + 1e-12)) {
            violations += 1;
        }
        above_lower = above_lower.min(g / b.lower);
        below_upper = below_upper.min(b.upper / g);
    }
    Ok((violations == 0, format!(
            "{} chains, {violations} violations; min gamma/lower {above_lower:.4}, min upper/gamma {below_upper:.4}",
            chains.len()
        )))
}

fn a4(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut violations = Vec::new();
    let mut min_ratio = f64::INFINITY;
    for i in 0..30u64 {
        let n = 2 + (i as usize % 9);
        let spec = random_chain(n, opts.seed.wrapping_add(1000 + i))?;
        let phi = brute_force_bottleneck(&spec)?;
        let g = exact_gap(&spec)?;
        min_ratio = min_ratio.min(g / (phi * phi));
        let ok = phi * phi <= g * (1.0 + 1e-12) && g <= 2.0 * phi * (1.0 + 1e-12);
        if !ok {
            violations.push(i);
        }
    }
    Ok((
        violations.is_empty(),
        format!("30 chains, {} violations {violations:?}, min gamma/Phi*^2 = {min_ratio:.3}", violations.len()),
    ))
}

fn a5() -> Result<(bool, String)> {
    let n = 10;
    let mut worst: f64 = 0.0;
    for (beta, b) in [(0.8, 0.1), (1.3, 0.0)] {
        let weights = annealed_log_weights(n, &params(3, beta, b))?;
        let full = curie_weiss_full_chain(&weights, false)?;
        let proj = exact_gap(&BirthDeathSpec::build(weights)?)?;
        worst = worst.max((full.gap - proj).abs());
    }
    Ok((worst <= 1e-9, format!("n=10, max |gap_full - gap_projection| = {worst:.3e} (tol 1e-9)")))
}

/// `(1/n) log E tau` from `ceil(n t3)` to `ceil(n t1)` on the annealed chain.
pub fn metastable_rate(n: usize, p: &ModelParams) -> Result<f64> {
    let report = critical_points(p);
    if report.criticals.len() != 3 {
        return Err(Error::Regime("metastable rate needs three critical points".into()));
    }
    let from = (n as f64 * report.criticals[0].t).ceil() as usize;
    let to = ((n as f64 * report.criticals[2].t).ceil() as usize).min(n);
    Ok(expected_hitting(&BirthDeathSpec::annealed(n, p)?, from, to)?.log_mean / n as f64)
}

fn a6() -> Result<(bool, String)> {
    let p = params(3, 1.2, 0.05);
    let lambda = barrier_lambda(&p).ok_or_else(|| Error::Regime("no barrier".into()))?;
    let rate = metastable_rate(800, &p)?;
    let rel = (rate - lambda).abs() / lambda;
    Ok((rel <= 0.1, format!("n=800 rate {rate:.5} vs lambda {lambda:.5}, relative error {rel:.3} (tol 0.1)")))
}

fn a7() -> Result<(bool, String)> {
    let betas = [1.0, 2.0, 4.0, 8.0, 16.0];
    let lambdas: Vec<f64> = betas.iter().map(|&b| barrier_lambda(&params(3, b, 0.0)).unwrap_or(f64::NAN)).collect();
    let tail = &lambdas[2..];
    let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = max / min;
    Ok((ratio <= 1.5, format!("lambda at beta {betas:?} = {lambdas:.4?}; max/min over 4,8,16 = {ratio:.4} (tol 1.5)")))
}

fn a8() -> Result<(bool, String)> {
    let p = params(3, 0.3, 0.0);
    let s = critical_points(&p).global_max().t;
    let c_star = cutoff_constant(s, phi_hat_second(s, &p))?;
    let ns = [128usize, 256, 512];
    let mut ratios = Vec::new();
    let mut windows = Vec::new();
    let mut sweep_ok = true;
    for &n in &ns {
        let spec = BirthDeathSpec::annealed(n, &p)?;
        let horizon = (4.0 * c_star * n as f64 * (n as f64).ln()) as usize;
        let curve = tv_evolution_until(&spec, TvStart::Extremes, horizon, 1, 0.2)?;
        if n == 128 {
            let all = tv_evolution_until(&spec, TvStart::All, horizon, 1, 0.2)?;
            sweep_ok = all.t_mix_quarter == curve.t_mix_quarter && all.window == curve.window;
        }
        let t = curve.t_mix_quarter.ok_or_else(|| Error::Budget("TV did not reach 1/4".into()))? as f64;
        ratios.push(t / (n as f64 * (n as f64).ln()));
        windows.push(curve.window.unwrap_or(f64::NAN) / n as f64);
    }
    let errs: Vec<f64> = ratios.iter().map(|r| (r - c_star).abs() / c_star).collect();
    let approaching = errs.windows(2).all(|w| w[1] <= w[0]);
    let wmax = windows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let wmin = windows.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = wmax / wmin - 1.0;
    let pass = errs[2] <= 0.15 && approaching && spread <= 0.4 && sweep_ok;
    Ok((
        pass,
        format!(
            "c*={c_star:.4}; t_mix/(n log n) at n={ns:?}: {ratios:.4?} (rel err {errs:.3?}, tol 0.15, approaching={approaching}); \
             window/n {windows:.3?} spread {spread:.3} (tol 0.4); full sweep agrees at n=128: {sweep_ok}"
        ),
    ))
}

fn a9() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for beta in [0.0, 0.25, 0.5] {
        // F(s) = (beta/2)(2s-1)^2, so F'(s) = 2 beta (2s-1) and G''(s) = -1/(s(1-s)) + 4 beta
        let f_prime = |s: f64| 2.0 * beta * (2.0 * s - 1.0);
        let s = crate::numerics::bisect(|s| drift(s, f_prime), 0.1, 0.9).unwrap_or(0.5);
        let g2 = -1.0 / (s * (1.0 - s)) + 4.0 * beta;
        let c = cutoff_constant(s, g2)?;
        worst = worst.max((c - 1.0 / (2.0 * (1.0 - beta))).abs());
    }
    Ok((worst <= 1e-12, format!("max |c* - 1/(2(1-beta))| = {worst:.3e} over beta in {{0, 0.25, 0.5}} (tol 1e-12)")))
}

fn a10(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let sizes = [6usize, 8, 10, 12];
    let outcome: Vec<(usize, usize, usize, usize)> = (0..50u64)
        .into_par_iter()
        .map(|i| -> Result<(usize, usize, usize, usize)> {
            let n = sizes[i as usize % sizes.len()];
            let g = sample_configuration_model(n, 3, opts.seed.wrapping_add(2000 + i))?;
            let growth = sample_simple(12, 3, opts.seed.wrapping_add(3000 + i), 100_000)?.to_multigraph();
            let (mut ratio_checks, mut ratio_bad, mut add_checks, mut add_bad) = (0, 0, 0, 0);
            for beta in [0.5, 1.5] {
                let checks = all_ratio_checks(&fixed_spin_partition(&g, beta)?);
                ratio_checks += checks.len();
                ratio_bad += checks.iter().filter(|c| !c.pass).count();
                for k in 8..12 {
                    let checks = vertex_add_bounds_check(&growth.induced_prefix(k), &growth.induced_prefix(k + 1), beta, 3)?;
                    add_checks += checks.len();
                    add_bad += checks.iter().filter(|c| !c.pass()).count();
                }
            }
            Ok((ratio_checks, ratio_bad, add_checks, add_bad))
        })
        .collect::<Result<_>>()?;
    let sum = |f: fn(&(usize, usize, usize, usize)) -> usize| outcome.iter().map(f).sum::<usize>();
    let (rc, rb, ac, ab) = (sum(|x| x.0), sum(|x| x.1), sum(|x| x.2), sum(|x| x.3));
    Ok((
        rb == 0 && ab == 0,
        format!("ratio bounds {rb}/{rc} violations; vertex-addition bounds {ab}/{ac} violations (50 graphs, 50 growth sequences)"),
    ))
}

fn a11() -> Result<(bool, String)> {
    let beta = critical_beta(3) + 0.5;
    let base = params(3, beta, 0.0);
    let p = base.with_field(tree_critical_field(&base) + 0.2);
    let depths: Vec<usize> = (8..=16).collect();
    let max_ratio = |side| -> Result<(f64, f64)> {
        let prof = influence_decay(&depths, &p, side)?;
        Ok((prof.kappa, prof.ratios.iter().copied().fold(0.0, f64::max)))
    };
    let (kappa, free) = max_ratio(LeafState::Free)?;
    let (_, plus) = max_ratio(LeafState::Plus)?;
    // the minus side lingers near the ghost of the vanished minus fixed point
    // for several levels, so it is reported but does not gate
    let (_, minus) = max_ratio(LeafState::Minus)?;
    let worst = free.max(plus);
    let pass = worst <= 1.05 * kappa && kappa < 0.5;
    Ok((
        pass,
        format!(
            "kappa = {kappa:.5} (< 1/2); max per-level ratio free {free:.5}, plus {plus:.5} (tol 1.05 kappa = {:.5}); minus-side diagnostic {minus:.5}",
            1.05 * kappa
        ),
    ))
}

fn a12() -> Result<(bool, String)> {
    let p = params(3, 1.0, 0.05);
    let m = root_magnetization(30, &Boundary::Uniform(LeafState::Minus), &p)?;
    let t3 = critical_points(&p).criticals[0].t;
    let via_map = map_r_to_t(tree_fixed_points(&p).r_minus(), p.beta)?;
    let diff = (m - (2.0 * t3 - 1.0)).abs();
    let pass = diff <= 1e-6 && (via_map - t3).abs() <= 1e-6;
    Ok((pass, format!("m_minus = {m:.9}, 2 t3 - 1 = {:.9}, p(r_minus) = {via_map:.9}; diff {diff:.2e} (tol 1e-6)", 2.0 * t3 - 1.0)))
}

fn a13(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let samples = 100u64;
    let checks: Vec<_> = (0..samples)
        .into_par_iter()
        .map(|i| isoperimetric_separation(&sample_configuration_model(16, 3, opts.seed.wrapping_add(4000 + i))?, 12.0))
        .collect::<Result<_>>()?;
    let eligible: Vec<_> = checks.iter().filter(|c| c.meets_isoperimetric_bound).collect();
    let failures = eligible.iter().filter(|c| !c.pass).count();
    Ok((
        failures == 0,
        format!(
            "{} of {samples} graphs meet i >= d/2 - sqrt(d log 2) (fraction {:.2}); {failures} violations of the ratio bound",
            eligible.len(),
            eligible.len() as f64 / samples as f64
        ),
    ))
}

/// Bootstrap confidence interval for the slope of log-median hitting time
/// against `n`.
pub fn bootstrap_slope(ns: &[usize], samples: &[Vec<f64>], resamples: usize, seed: u64) -> (f64, f64, f64) {
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let point: Vec<f64> = samples.iter().map(|s| median(s).ln()).collect();
    let slope = ols_slope(&x, &point);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes: Vec<f64> = (0..resamples)
        .map(|_| {
            let y: Vec<f64> = samples
                .iter()
                .map(|s| {
                    let draw: Vec<f64> = (0..s.len()).map(|_| s[rng.gen_range(0..s.len())]).collect();
                    median(&draw).ln()
                })
                .collect();
            ols_slope(&x, &y)
        })
        .collect();
    slopes.sort_by(|a, b| a.total_cmp(b));
    let lo = slopes[(0.025 * resamples as f64) as usize];
    let hi = slopes[((0.975 * resamples as f64) as usize).min(resamples - 1)];
    (slope, lo, hi)
}

fn a14(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let p = params(3, 0.9, 0.0);
    let ns = [24usize, 48, 96];
    let horizon = 20_000_000;
    let mut samples = Vec::new();
    let mut censored = Vec::new();
    for (j, &n) in ns.iter().enumerate() {
        let sim = SimConfig::new(opts.seed.wrapping_add(j as u64), horizon, 32, horizon)?;
        let obs = hitting_time_fresh_graphs(n, &p, majority_threshold(n), &sim, opts.seed.wrapping_add(5000 + 100 * j as u64))?;
        censored.push(obs.iter().filter(|o| o.censored).count());
        samples.push(obs.iter().map(|o| o.time.max(1) as f64).collect::<Vec<_>>());
    }
    let medians: Vec<f64> = samples.iter().map(|s| median(s)).collect();
    let (slope, lo, hi) = bootstrap_slope(&ns, &samples, 2000, opts.seed);
    Ok((
        lo > 0.0,
        format!(
            "medians {} at n={ns:?} (censored {censored:?} of 32 at {horizon:.0e}); \
             log-median slope {slope:.4} per site, 95% CI [{lo:.4}, {hi:.4}]",
            sci(&medians)
        ),
    ))
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Exact weight error helper exposed for the CLI.
pub fn weight_error(n: usize, p: &ModelParams) -> Result<f64> {
    Ok((0..=n).map(|k| (exact_fn(k, n, p).unwrap_or(f64::NAN) - f_limit(k as f64 / n as f64, p)).abs()).fold(0.0, f64::max))
}
