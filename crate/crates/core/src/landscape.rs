//! Annealed fixed-magnetization free energy on the random `d`-regular graph.
//!
//! `phi_hat(t)` is the exponential growth rate of the expected partition sum
//! restricted to configurations with a fraction `t` of plus spins:
//!
//! ```text
//! phi_hat(t) = beta*d/2 - B + I(t) + 2*B*t + d * int_0^{min(t,1-t)} log f_beta(s) ds
//! ```
//!
//! Its critical points decide whether the annealed Glauber dynamics is
//! metastable (three critical points) or mixes in `O(n log n)` (one).
//! Negative fields are handled through the spin-flip symmetry
//! `(B, t) -> (-B, 1 - t)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{bisect, entropy, integrate, log_add_exp};
use crate::params::ModelParams;

const QUAD_TOL: f64 = 1e-11;

/// `f_beta(t)`; for `t > 1/2` the same display is evaluated in rationalised
/// form `2t / (sqrt(Q) - e^{-2beta}(1-2t))`, which is exact algebra and keeps
/// precision up to `t = 1`, where it equals `e^{2 beta}`.
pub fn f_beta(t: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("f_beta needs t in [0,1], got {t}")));
    }
    Ok(f_beta_unchecked(t, beta))
}

fn sqrt_q(t: f64, a: f64) -> f64 {
    // 1 + (a^2 - 1)(1-2t)^2 rewritten without cancellation near t = 0, 1
    let s = 1.0 - 2.0 * t;
    (a * a * s * s + 4.0 * t * (1.0 - t)).sqrt()
}

fn f_beta_unchecked(t: f64, beta: f64) -> f64 {
    let a = (-2.0 * beta).exp();
    let s = 1.0 - 2.0 * t;
    let root = sqrt_q(t, a);
    if t <= 0.5 {
        (a * s + root) / (2.0 * (1.0 - t))
    } else {
        2.0 * t / (root - a * s)
    }
}

fn log_f(t: f64, beta: f64) -> f64 {
    f_beta_unchecked(t, beta).ln()
}

/// Derivative of `log f_beta` at `t in (0,1)`.
pub fn log_f_prime(t: f64, beta: f64) -> f64 {
    // log f(t) = -log f(1-t), so the derivative is symmetric about 1/2
    let t = if t > 0.5 { 1.0 - t } else { t };
    let a = (-2.0 * beta).exp();
    let s = 1.0 - 2.0 * t;
    let root = sqrt_q(t, a);
    let numer = a * s + root;
    let q_prime = 4.0 * s * (1.0 - a * a);
    let numer_prime = -2.0 * a + q_prime / (2.0 * root);
    numer_prime / numer + 1.0 / (1.0 - t)
}

/// `int_0^{min(t,1-t)} log f_beta(s) ds`.
pub fn log_f_integral(t: f64, beta: f64) -> f64 {
    let upper = t.min(1.0 - t);
    if upper <= 0.0 || beta == 0.0 {
        return 0.0;
    }
    integrate(|s| log_f(s, beta), 0.0, upper, QUAD_TOL)
}

/// `phi_hat_{beta,B}(t)` for `t in [0,1]`.
pub fn phi_hat(t: f64, p: &ModelParams) -> f64 {
    let d = p.degree();
    p.beta * d / 2.0 - p.field + entropy(t) + 2.0 * p.field * t + d * log_f_integral(t, p.beta)
}

/// `phi_hat(1 - u)` evaluated from `u`, exact for `u` below machine epsilon.
pub fn phi_hat_mirror(u: f64, p: &ModelParams) -> f64 {
    phi_hat(u, &p.with_field(-p.field))
}

/// Limiting annealed weight `F(t) = phi_hat(t) - I(t)`.
pub fn f_limit(t: f64, p: &ModelParams) -> f64 {
    let d = p.degree();
    p.beta * d / 2.0 + p.field * (2.0 * t - 1.0) + d * log_f_integral(t, p.beta)
}

/// Closed-form `phi_hat'(t) = log((1-t)/t) + d log f_beta(t) + 2B`; signed
/// infinities at the endpoints.
pub fn phi_hat_prime(t: f64, p: &ModelParams) -> f64 {
    if t <= 0.0 {
        return f64::INFINITY;
    }
    if t >= 1.0 {
        return f64::NEG_INFINITY;
    }
    (-t).ln_1p() - t.ln() + p.degree() * log_f(t, p.beta) + 2.0 * p.field
}

/// `phi_hat'(1 - u)` from `u`.
#[cfg(test)]
fn phi_hat_prime_mirror(u: f64, p: &ModelParams) -> f64 {
    -phi_hat_prime(u, &p.with_field(-p.field))
}

/// Closed-form second derivative; independent of `B`.
pub fn phi_hat_second(t: f64, p: &ModelParams) -> f64 {
    -1.0 / (t * (1.0 - t)) + p.degree() * log_f_prime(t, p.beta)
}

/// Constant `c` of the inflection quadratic `t^2 - t + c = 0`.
fn inflection_constant(p: &ModelParams) -> f64 {
    let d = p.degree();
    let e = (-4.0 * p.beta).exp();
    e * (d - 1.0) / ((d - 2.0).powi(2) * (1.0 - e))
}

/// Sign of `phi_hat''(t)` from the inflection quadratic: `-1` concave,
/// `+1` convex, `0` at an inflection point.
pub fn curvature_sign(t: f64, p: &ModelParams) -> i8 {
    if p.beta == 0.0 {
        return -1;
    }
    let q = t * t - t + inflection_constant(p);
    if q > 0.0 {
        -1
    } else if q < 0.0 {
        1
    } else {
        0
    }
}

/// Inflection point `t_u in (0, 1/2]` of `phi_hat_{beta,0}`; `None` for
/// `beta <= beta_c`.
pub fn inflection_tu(p: &ModelParams) -> Option<f64> {
    if p.beta <= p.beta_c() {
        return None;
    }
    let c = inflection_constant(p);
    let disc = (1.0 - 4.0 * c).max(0.0);
    // smaller root of t^2 - t + c in the cancellation-free form
    Some(2.0 * c / (1.0 + disc.sqrt()))
}

/// `J(t) = phi_hat(t) - (beta d/2 - B + I(t) + 2Bt + d t log f_beta(t))`.
pub fn j_term(t: f64, p: &ModelParams) -> f64 {
    let d = p.degree();
    phi_hat(t, p) - (p.beta * d / 2.0 - p.field + entropy(t) + 2.0 * p.field * t + d * t * log_f(t, p.beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    LocalMax,
    LocalMin,
    GlobalMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub t: f64,
    /// `1 - t`, carried separately so that maxima next to `t = 1` keep
    /// their precision.
    pub one_minus_t: f64,
    pub kind: CriticalKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeReport {
    pub params: ModelParams,
    pub t_u: Option<f64>,
    /// Critical points in increasing `t`.
    pub criticals: Vec<CriticalPoint>,
    pub b_hat_c: Option<f64>,
    pub lambda: Option<f64>,
    pub pressure: f64,
}

impl LandscapeReport {
    pub fn is_metastable(&self) -> bool {
        self.criticals.len() == 3
    }

    pub fn global_max(&self) -> &CriticalPoint {
        self.criticals
            .iter()
            .find(|c| c.kind == CriticalKind::GlobalMax)
            .expect("every landscape has a global maximiser")
    }
}

/// Smallest `u > 0` at which `g(u) > 0`, searching downward from `start`.
fn positive_floor<G: Fn(f64) -> f64>(g: &G, start: f64) -> f64 {
    let mut u = start;
    while g(u) <= 0.0 && u > 1e-290 {
        u *= 1e-4;
    }
    u
}

/// Critical points of `phi_hat_{beta,B}`, classified by curvature.
pub fn critical_points(p: &ModelParams) -> LandscapeReport {
    if p.field < 0.0 {
        let mut report = critical_points(&p.with_field(-p.field));
        report.params = *p;
        for c in report.criticals.iter_mut() {
            std::mem::swap(&mut c.t, &mut c.one_minus_t);
        }
        report.criticals.reverse();
        return report;
    }
    let b = p.field;
    let t_u = inflection_tu(p);
    let b_hat_c = t_u.map(|_| annealed_bc(p));
    let flipped = p.with_field(-b);
    let lower = |u: f64| phi_hat_prime(u, p);
    let upper = |u: f64| phi_hat_prime(u, &flipped);

    let point = |t: f64, one_minus_t: f64, kind: CriticalKind, mirrored: bool| CriticalPoint {
        t,
        one_minus_t,
        kind,
        value: if mirrored { phi_hat_mirror(one_minus_t, p) } else { phi_hat(t, p) },
    };

    let mut criticals = Vec::with_capacity(3);
    match (t_u, b_hat_c) {
        (Some(tu), Some(bc)) if b < bc => {
            let lo = positive_floor(&lower, tu.min(1e-3));
            let t3 = bisect(lower, lo, tu).expect("phi_hat' changes sign on (0, t_u)");
            let t2 = bisect(lower, tu, 0.5).expect("phi_hat' changes sign on (t_u, 1/2]");
            let lo = positive_floor(&upper, tu.min(1e-3));
            let u1 = bisect(upper, lo, tu).expect("mirrored phi_hat' changes sign on (0, t_u)");
            let c3 = point(t3, 1.0 - t3, CriticalKind::LocalMax, false);
            let c2 = point(t2, 1.0 - t2, CriticalKind::LocalMin, false);
            let c1 = point(1.0 - u1, u1, CriticalKind::GlobalMax, true);
            criticals.extend([c3, c2, c1]);
        }
        _ => {
            // beta <= beta_c, or B >= B_hat_c: one maximiser, located on the
            // mirrored side below t_u (below 1/2 when there is no inflection)
            let hi = t_u.unwrap_or(0.5);
            let u1 = bisect(upper, positive_floor(&upper, hi.min(1e-3)), hi).unwrap_or(hi);
            criticals.push(point(1.0 - u1, u1, CriticalKind::GlobalMax, true));
        }
    }
    let pressure = criticals.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    let lambda = if criticals.len() == 3 {
        Some(criticals[0].value.min(criticals[2].value) - criticals[1].value)
    } else {
        None
    };
    LandscapeReport { params: *p, t_u, criticals, b_hat_c, lambda, pressure }
}

/// Annealed critical field `B_hat_c = -phi_hat'_{beta,0}(t_u) / 2`; zero for
/// `beta <= beta_c`. The field of `p` is ignored.
pub fn annealed_bc(p: &ModelParams) -> f64 {
    match inflection_tu(p) {
        Some(tu) => (-0.5 * phi_hat_prime(tu, &p.with_field(0.0))).max(0.0),
        None => 0.0,
    }
}

/// Barrier `min(phi_hat(t3), phi_hat(t1)) - phi_hat(t2)`; `None` for a
/// unimodal landscape.
pub fn barrier_lambda(p: &ModelParams) -> Option<f64> {
    critical_points(p).lambda
}

/// Log-moment generating function of the number of plus/minus pairs in a
/// uniform perfect matching, `log g(a, b) = log E[e^{-2 beta X}]` for `a`
/// plus and `b` minus half-edges.
///
/// Returns `log g(a, total - a)` for every `a = 0..=total`, keeping only two
/// levels of the recursion
/// `g(a,b) = [(a-1) g(a-2,b) + b e^{-2 beta} g(a-1,b-1)] / (a+b-1)`.
pub fn pairing_mgf_row(total: usize, beta: f64) -> Result<Vec<f64>> {
    if total % 2 == 1 {
        return Err(Error::OddHalfEdges(total));
    }
    let ln: Vec<f64> = (0..=total.max(1)).map(|i| (i as f64).ln()).collect();
    let mut prev = vec![0.0];
    for m in (2..=total).step_by(2) {
        let mut next = vec![0.0; m + 1];
        for a in 1..=m {
            let b = m - a;
            let same = if a >= 2 { ln[a - 1] + prev[a - 2] } else { f64::NEG_INFINITY };
            let cross = if b >= 1 { ln[b] - 2.0 * beta + prev[a - 1] } else { f64::NEG_INFINITY };
            next[a] = log_add_exp(same, cross) - ln[m - 1];
        }
        prev = next;
    }
    Ok(prev)
}

/// Single value `log g(a, b)`.
pub fn pairing_mgf(a: usize, b: usize, beta: f64) -> Result<f64> {
    if (a + b) % 2 == 1 {
        return Err(Error::OddHalfEdges(a + b));
    }
    Ok(pairing_mgf_row(a + b, beta)?[a])
}

/// Full table of `log g(a, b)` for `a + b <= cap`, `a + b` even.
#[derive(Debug, Clone)]
pub struct PairingMgfTable {
    beta: f64,
    levels: Vec<Vec<f64>>,
}

impl PairingMgfTable {
    pub fn new(beta: f64, cap: usize) -> Self {
        let mut levels = vec![vec![0.0]];
        for m in (2..=cap).step_by(2) {
            let prev = levels.last().expect("level 0 present");
            let mut next = vec![0.0; m + 1];
            for a in 1..=m {
                let b = m - a;
                let same = if a >= 2 { ((a - 1) as f64).ln() + prev[a - 2] } else { f64::NEG_INFINITY };
                let cross = if b >= 1 { (b as f64).ln() - 2.0 * beta + prev[a - 1] } else { f64::NEG_INFINITY };
                next[a] = log_add_exp(same, cross) - ((m - 1) as f64).ln();
            }
            levels.push(next);
        }
        Self { beta, levels }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn get(&self, a: usize, b: usize) -> Option<f64> {
        if (a + b) % 2 == 1 {
            return None;
        }
        self.levels.get((a + b) / 2).map(|level| level[a])
    }
}

/// Exact finite-`n` annealed log-weights `n F_n(k)` for `k = 0..=n`, where
/// the annealed measure of a configuration with `k` plus spins is
/// proportional to `e^{n F_n(k)}`.
pub fn annealed_log_weights(n: usize, p: &ModelParams) -> Result<Vec<f64>> {
    let d = p.d;
    let row = pairing_mgf_row(n * d, p.beta)?;
    let nf = n as f64;
    Ok((0..=n)
        .map(|k| p.beta * (d * n) as f64 / 2.0 + row[d * k] + p.field * (2.0 * k as f64 - nf))
        .collect())
}

/// `F_n(k) = beta d/2 + log g(dk, d(n-k)) / n + B (2k/n - 1)`.
pub fn exact_fn(k: usize, n: usize, p: &ModelParams) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
    }
    Ok(annealed_log_weights(n, p)?[k] / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize, beta: f64, b: f64) -> ModelParams {
        ModelParams::new(d, beta, b).unwrap()
    }

    #[test]
    fn f_beta_values() {
        for beta in [0.0, 0.3, 1.0, 4.0] {
            assert!((f_beta(0.5, beta).unwrap() - 1.0).abs() < 1e-15);
            assert!((f_beta(0.0, beta).unwrap() - (-2.0 * beta).exp()).abs() < 1e-15);
            assert!((f_beta(1.0, beta).unwrap() - (2.0 * beta).exp()).abs() < 1e-12 * (2.0 * beta).exp());
        }
        let prod = f_beta(0.3, 1.0).unwrap() * f_beta(0.7, 1.0).unwrap();
        assert!((prod - 1.0).abs() < 1e-12);
        assert!(f_beta(-0.1, 1.0).is_err());
        assert!(f_beta(1.1, 1.0).is_err());
    }

    #[test]
    fn phi_hat_endpoints_and_tilt() {
        let p = params(3, 1.0, 0.2);
        assert!((phi_hat(0.0, &p) - (1.5 - 0.2)).abs() < 1e-15);
        assert!((phi_hat(1.0, &p) - (1.5 + 0.2)).abs() < 1e-15);
        let t = 0.37;
        let diff = phi_hat(t, &p) - phi_hat(t, &p.with_field(0.0));
        assert!((diff - 0.2 * (2.0 * t - 1.0)).abs() < 1e-12);
        let free = params(3, 0.0, 0.0);
        assert!((phi_hat(0.5, &free) - 2f64.ln()).abs() < 1e-15);
        assert!((phi_hat(0.21, &free) - entropy(0.21)).abs() < 1e-15);
    }

    #[test]
    fn mirror_matches_direct_evaluation() {
        let p = params(4, 1.3, 0.15);
        for u in [0.05, 0.2, 0.4] {
            assert!((phi_hat_mirror(u, &p) - phi_hat(1.0 - u, &p)).abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_values() {
        let p = params(3, 1.0, 0.1);
        assert!((phi_hat_prime(0.5, &p) - 0.2).abs() < 1e-14);
        assert_eq!(phi_hat_prime(0.0, &p), f64::INFINITY);
        assert_eq!(phi_hat_prime(1.0, &p), f64::NEG_INFINITY);
        let free = params(3, 0.0, 0.0);
        assert!((phi_hat_prime(0.2, &free) - (0.8f64 / 0.2).ln()).abs() < 1e-14);
        // finite-difference oracle
        let (t, h) = (0.4, 1e-5);
        let fd = (phi_hat(t + h, &p) - phi_hat(t - h, &p)) / (2.0 * h);
        assert!((fd - phi_hat_prime(t, &p)).abs() < 1e-6);
    }

    #[test]
    fn second_derivative_matches_differences_and_quadratic_sign() {
        for (d, beta) in [(3, 0.3), (3, 1.0), (4, 0.8), (5, 2.0)] {
            let p = params(d, beta, 0.0);
            for i in 1..40 {
                let t = i as f64 / 40.0;
                let h = 1e-6;
                let fd = (phi_hat_prime(t + h, &p) - phi_hat_prime(t - h, &p)) / (2.0 * h);
                let exact = phi_hat_second(t, &p);
                assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "d={d} beta={beta} t={t}");
                if exact.abs() > 1e-6 {
                    assert_eq!(curvature_sign(t, &p), exact.signum() as i8, "d={d} beta={beta} t={t}");
                }
            }
        }
    }

    #[test]
    fn inflection_point() {
        // beta_c: discriminant vanishes
        let p = params(3, crate::params::critical_beta(3) + 1e-12, 0.0);
        assert!((inflection_tu(&p).unwrap() - 0.5).abs() < 1e-5);
        assert!(inflection_tu(&params(3, 0.5, 0.0)).is_none());
        let p = params(3, 1.0, 0.0);
        let tu = inflection_tu(&p).unwrap();
        assert!(tu > 0.0 && tu < 0.5);
        assert!(phi_hat_second(tu - 1e-4, &p) < 0.0 && phi_hat_second(tu + 1e-4, &p) > 0.0);
        assert!(inflection_tu(&params(3, 20.0, 0.0)).unwrap() < 1e-8);
    }

    #[test]
    fn symmetric_low_temperature_landscape() {
        let p = params(3, 1.0, 0.0);
        let r = critical_points(&p);
        assert_eq!(r.criticals.len(), 3);
        assert_eq!(r.criticals[1].t, 0.5);
        assert!((r.criticals[2].t - (1.0 - r.criticals[0].t)).abs() < 1e-12);
        assert!((r.criticals[0].value - r.criticals[2].value).abs() < 1e-10);
        let lambda = r.lambda.unwrap();
        assert!((lambda - (r.criticals[0].value - phi_hat(0.5, &p))).abs() < 1e-12);
    }

    #[test]
    fn unique_critical_regimes() {
        let r = critical_points(&params(3, 0.3, 0.0));
        assert_eq!(r.criticals.len(), 1);
        assert!((r.criticals[0].t - 0.5).abs() < 1e-12);
        let p = params(3, 1.0, 0.0);
        let bc = annealed_bc(&p);
        let r = critical_points(&p.with_field(1.5 * bc));
        assert_eq!(r.criticals.len(), 1);
        assert!(r.criticals[0].t > 0.5 && r.criticals[0].t < 1.0);
        assert!(r.lambda.is_none());
    }

    #[test]
    fn negative_field_mirrors() {
        let p = params(3, 1.0, 0.05);
        let a = critical_points(&p);
        let b = critical_points(&p.with_field(-0.05));
        for (x, y) in a.criticals.iter().zip(b.criticals.iter().rev()) {
            assert!((x.t - y.one_minus_t).abs() < 1e-14);
            assert!((x.value - y.value).abs() < 1e-14);
        }
        assert!((a.pressure - b.pressure).abs() < 1e-14);
    }

    #[test]
    fn threshold_is_sharp() {
        let p = params(3, 1.0, 0.0);
        let bc = annealed_bc(&p);
        assert!(bc > 0.0 && bc < 3.0);
        assert_eq!(critical_points(&p.with_field(bc * (1.0 - 1e-4))).criticals.len(), 3);
        assert_eq!(critical_points(&p.with_field(bc * (1.0 + 1e-4))).criticals.len(), 1);
        // supremum characterisation on a grid
        let grid_max = (1..5000)
            .map(|i| -0.5 * phi_hat_prime(0.5 * i as f64 / 5000.0, &p))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(grid_max <= bc + 1e-12 && grid_max > bc - 1e-6);
        // vanishes at beta_c
        let near = params(3, crate::params::critical_beta(3) + 1e-6, 0.0);
        assert!(annealed_bc(&near) < 1e-6);
        assert_eq!(annealed_bc(&params(3, 0.2, 0.0)), 0.0);
    }

    #[test]
    fn reported_roots_are_roots() {
        for (d, beta, b) in [(3, 1.0, 0.05), (4, 2.0, 0.3), (3, 8.0, 0.0), (5, 0.4, 0.2), (3, 16.0, 1.0)] {
            let p = params(d, beta, b);
            for c in critical_points(&p).criticals {
                let g = if c.t > 0.5 { phi_hat_prime_mirror(c.one_minus_t, &p) } else { phi_hat_prime(c.t, &p) };
                assert!(g.abs() <= 1e-10, "d={d} beta={beta} B={b} t={} g={g}", c.t);
                let expected = if c.kind == CriticalKind::LocalMin { 1 } else { -1 };
                assert_eq!(curvature_sign(c.t.min(c.one_minus_t), &p), expected);
            }
        }
    }

    #[test]
    fn ordering_of_three_criticals() {
        let p = params(3, 1.2, 0.05);
        let r = critical_points(&p);
        let tu = r.t_u.unwrap();
        let c = &r.criticals;
        assert!(c[0].t < tu && tu < c[1].t && c[1].t <= 0.5 && 0.5 < 1.0 - tu && 1.0 - tu < c[2].t);
        assert!(c[2].value >= c[0].value && c[0].value >= c[1].value);
        assert_eq!(r.pressure, c[2].value);
    }

    #[test]
    fn pressure_at_infinite_temperature() {
        let r = critical_points(&params(3, 0.0, 0.0));
        assert!((r.pressure - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn pairing_mgf_small_cases() {
        let beta = 0.7;
        for b in (0..10).step_by(2) {
            assert_eq!(pairing_mgf(0, b, beta).unwrap(), 0.0);
        }
        assert!((pairing_mgf(1, 1, beta).unwrap() - (-2.0 * beta)).abs() < 1e-15);
        let expected = ((1.0 + 2.0 * (-4.0 * beta).exp()) / 3.0).ln();
        assert!((pairing_mgf(2, 2, beta).unwrap() - expected).abs() < 1e-15);
        assert_eq!(pairing_mgf(2, 1, beta), Err(Error::OddHalfEdges(3)));
        let table = PairingMgfTable::new(beta, 12);
        assert!((table.get(2, 2).unwrap() - expected).abs() < 1e-15);
        assert_eq!(table.get(5, 7).unwrap(), pairing_mgf(5, 7, beta).unwrap());
        assert!(table.get(1, 2).is_none());
    }

    #[test]
    fn pairing_mgf_matches_matching_enumeration() {
        // enumerate all perfect matchings of a + b points
        fn enumerate(free: &mut Vec<bool>, labels: &[bool], beta: f64) -> (f64, f64) {
            let Some(i) = free.iter().position(|&f| f) else { return (1.0, 1.0) };
            free[i] = false;
            let (mut total, mut count) = (0.0, 0.0);
            for j in i + 1..labels.len() {
                if free[j] {
                    free[j] = false;
                    let (s, c) = enumerate(free, labels, beta);
                    let w = if labels[i] != labels[j] { (-2.0 * beta).exp() } else { 1.0 };
                    total += w * s;
                    count += c;
                    free[j] = true;
                }
            }
            free[i] = true;
            (total, count)
        }
        let beta = 0.45;
        for (a, b) in [(3, 1), (2, 4), (3, 3), (5, 3), (1, 7)] {
            let labels: Vec<bool> = (0..a + b).map(|i| i < a).collect();
            let (s, c) = enumerate(&mut vec![true; a + b], &labels, beta);
            assert!(((s / c).ln() - pairing_mgf(a, b, beta).unwrap()).abs() < 1e-13, "a={a} b={b}");
        }
    }

    #[test]
    fn exact_fn_boundary_and_symmetry() {
        let p = params(3, 1.0, 0.1);
        assert!((exact_fn(0, 50, &p).unwrap() - (1.5 - 0.1)).abs() < 1e-15);
        let w = annealed_log_weights(60, &p.with_field(0.0)).unwrap();
        for k in 0..=60 {
            assert!((w[k] - w[60 - k]).abs() / 60.0 < 1e-10);
        }
        assert!(annealed_log_weights(5, &p).is_err());
    }

    #[test]
    fn j_term_is_bounded_on_half_interval() {
        for beta in [1.0, 4.0, 16.0] {
            let p = params(3, beta, 0.0);
            let max = (1..100).map(|i| j_term(0.5 * i as f64 / 100.0, &p).abs()).fold(0.0, f64::max);
            assert!(max.is_finite() && max < 5.0, "beta={beta} max={max}");
        }
    }
}
