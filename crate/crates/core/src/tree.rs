//! Ising model on the `d`-regular tree.
//!
//! Boundary conditions are propagated to the root through the likelihood
//! ratio `R_v = P(sigma_v = -) / P(sigma_v = +)`, which satisfies
//! `R_v = e^{-2B} prod_w L_beta(R_w)` over the children `w` of `v`. All
//! recursions run on `theta = log R`, where a plus leaf is `theta = -inf`
//! and a minus leaf `theta = +inf`; both are represented exactly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{bisect, log_add_exp, sigmoid, softplus};
use crate::params::ModelParams;

/// Grid resolution of the fixed-point scan.
const SCAN_POINTS: usize = 10_000;
/// Roots closer than this in `theta` are treated as one tangential root.
const TANGENCY_SEPARATION: f64 = 1e-7;

/// `L_beta(x) = (e^{2beta} x + 1) / (e^{2beta} + x)`, with `L_beta(inf) = e^{2beta}`.
pub fn l_beta(x: f64, beta: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidParameter(format!("L_beta needs x >= 0, got {x}")));
    }
    Ok(log_l(x.ln(), beta).exp())
}

/// `log L_beta(e^theta)`, odd in `theta`, finite on all of `[-inf, inf]`.
pub fn log_l(theta: f64, beta: f64) -> f64 {
    if theta > 0.0 {
        return -log_l(-theta, beta);
    }
    softplus(2.0 * beta + theta) - 2.0 * beta - softplus(theta - 2.0 * beta)
}

/// `d/dtheta log L_beta(e^theta) = x L'(x) / L(x)`.
pub fn log_l_slope(theta: f64, beta: f64) -> f64 {
    let b2 = 2.0 * beta;
    if theta.is_infinite() {
        return 0.0;
    }
    -(-2.0 * b2).exp_m1() / ((1.0 + (-theta - b2).exp()) * (1.0 + (theta - b2).exp()))
}

/// `log L_beta'(x)` at `x = e^theta`.
fn log_l_derivative(theta: f64, beta: f64) -> f64 {
    4.0 * beta + (-(-4.0 * beta).exp()).ln_1p() - 2.0 * log_add_exp(2.0 * beta, theta)
}

/// Fixed-point residual `h(theta) = -2B + (d-1) log L(e^theta) - theta`.
fn residual(theta: f64, p: &ModelParams) -> f64 {
    -2.0 * p.field + (p.d as f64 - 1.0) * log_l(theta, p.beta) - theta
}

/// Slope of `h`; does not depend on the field.
fn residual_slope(theta: f64, p: &ModelParams) -> f64 {
    (p.d as f64 - 1.0) * log_l_slope(theta, p.beta) - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeFixedPoints {
    /// Roots `r > 0` of `r = e^{-2B} L_beta(r)^{d-1}` in increasing order.
    pub roots: Vec<f64>,
    pub log_roots: Vec<f64>,
    /// Whether the map `r -> e^{-2B} L_beta(r)^{d-1}` contracts at each root.
    pub stable: Vec<bool>,
    pub r_star: Option<f64>,
    pub kappa: Option<f64>,
}

impl TreeFixedPoints {
    pub fn is_unique(&self) -> bool {
        self.roots.len() == 1
    }

    /// Largest root; the limit of the minus boundary condition.
    pub fn r_minus(&self) -> f64 {
        *self.roots.last().expect("at least one fixed point")
    }

    /// Smallest root; the limit of the plus boundary condition.
    pub fn r_plus(&self) -> f64 {
        self.roots[0]
    }
}

fn scan_window(p: &ModelParams) -> (f64, f64) {
    let reach = 2.0 * p.beta * (p.d as f64 - 1.0) + 2.0 * p.field.abs() + 5.0;
    (-reach, reach)
}

/// Breakpoints of `h` where it turns: zeros of `h'` inside the scan window.
fn turning_points(p: &ModelParams) -> Vec<f64> {
    let (lo, hi) = scan_window(p);
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let mut out = Vec::new();
    let mut prev_x = lo;
    let mut prev = residual_slope(lo, p);
    for i in 1..SCAN_POINTS {
        let x = lo + step * i as f64;
        let s = residual_slope(x, p);
        if s == 0.0 || s.signum() != prev.signum() {
            if let Some(z) = bisect(|t| residual_slope(t, p), prev_x, x) {
                out.push(z);
            }
        }
        prev_x = x;
        prev = s;
    }
    out
}

fn roots_with_turns(p: &ModelParams, turns: &[f64]) -> Vec<f64> {
    let (lo, hi) = scan_window(p);
    let mut knots = vec![lo];
    knots.extend_from_slice(turns);
    knots.push(hi);
    let mut roots: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ha, hb) = (residual(a, p), residual(b, p));
        if ha == 0.0 {
            if roots.last() != Some(&a) {
                roots.push(a);
            }
            continue;
        }
        if ha.signum() != hb.signum() && hb != 0.0 {
            if let Some(r) = bisect(|t| residual(t, p), a, b) {
                roots.push(r);
            }
        } else if hb == 0.0 {
            roots.push(b);
        }
    }
    roots.dedup();
    if roots.len() == 3 {
        let gap_low = roots[1] - roots[0];
        let gap_high = roots[2] - roots[1];
        if gap_low <= TANGENCY_SEPARATION {
            roots = vec![roots[2]];
        } else if gap_high <= TANGENCY_SEPARATION {
            roots = vec![roots[0]];
        }
    }
    roots
}

/// All fixed points of the tree recursion, with stability and the
/// contraction rate when the fixed point is unique.
pub fn tree_fixed_points(p: &ModelParams) -> TreeFixedPoints {
    let log_roots = roots_with_turns(p, &turning_points(p));
    let dm1 = p.d as f64 - 1.0;
    let stable = log_roots.iter().map(|&th| dm1 * log_l_slope(th, p.beta) < 1.0).collect();
    let roots: Vec<f64> = log_roots.iter().map(|th| th.exp()).collect();
    let (r_star, kappa) = if roots.len() == 1 {
        (Some(roots[0]), Some(kappa_at(log_roots[0], p)))
    } else {
        (None, None)
    };
    TreeFixedPoints { roots, log_roots, stable, r_star, kappa }
}

/// `e^{-2B} L_beta(r)^{d-2} L_beta'(r)` at `r = e^theta`.
fn kappa_at(theta: f64, p: &ModelParams) -> f64 {
    (-2.0 * p.field + (p.d as f64 - 2.0) * log_l(theta, p.beta) + log_l_derivative(theta, p.beta)).exp()
}

/// Contraction rate at the unique fixed point; `None` when the recursion has
/// several fixed points.
pub fn kappa(p: &ModelParams) -> Option<f64> {
    tree_fixed_points(p).kappa
}

/// Uniqueness threshold `B_c^G`: bisection on `B` of the transition from
/// three fixed points to one. The field of `p` is ignored.
pub fn tree_critical_field(p: &ModelParams) -> f64 {
    if p.beta <= p.beta_c() {
        return 0.0;
    }
    let base = p.with_field(0.0);
    let turns = turning_points(&base);
    let count = |b: f64| roots_with_turns(&base.with_field(b), &turns).len();
    if count(0.0) < 3 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, p.beta * p.d as f64);
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if count(mid) >= 3 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `t = p(r) = 1 / (r L_beta(r) + 1)`, a decreasing bijection `(0,inf) -> (0,1)`.
pub fn map_r_to_t(r: f64, beta: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("r must lie in (0, inf), got {r}")));
    }
    let theta = r.ln();
    Ok(sigmoid(-(theta + log_l(theta, beta))))
}

/// Inverse map `r = f_beta(t) (1 - t) / t`.
pub fn map_t_to_r(t: f64, beta: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("t must lie in (0, 1), got {t}")));
    }
    Ok(crate::landscape::f_beta(t, beta)? * (1.0 - t) / t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafState {
    Plus,
    Minus,
    Free,
}

impl LeafState {
    fn seed(self, p: &ModelParams) -> f64 {
        match self {
            LeafState::Plus => f64::NEG_INFINITY,
            LeafState::Minus => f64::INFINITY,
            LeafState::Free => -2.0 * p.field,
        }
    }

    /// Pointwise order `plus <= free <= minus`.
    pub fn rank(self) -> u8 {
        match self {
            LeafState::Plus => 0,
            LeafState::Free => 1,
            LeafState::Minus => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Uniform(LeafState),
    /// One state per leaf, in depth-first order.
    Leaves(Vec<LeafState>),
}

/// Number of leaves at `depth` below a root of arity `root_arity` whose
/// interior vertices have `d - 1` children.
pub fn leaf_count(depth: usize, d: usize, root_arity: usize) -> usize {
    if depth == 0 {
        1
    } else {
        root_arity * (d - 1).pow(depth as u32 - 1)
    }
}

/// `log R` at the root for a boundary placed at `depth`.
pub fn root_log_ratio(depth: usize, boundary: &Boundary, p: &ModelParams, root_arity: usize) -> Result<f64> {
    let interior = p.d - 1;
    match boundary {
        Boundary::Uniform(state) => {
            let mut theta = state.seed(p);
            if depth == 0 {
                return Ok(theta);
            }
            for _ in 1..depth {
                theta = -2.0 * p.field + interior as f64 * log_l(theta, p.beta);
            }
            Ok(-2.0 * p.field + root_arity as f64 * log_l(theta, p.beta))
        }
        Boundary::Leaves(leaves) => {
            let expected = leaf_count(depth, p.d, root_arity);
            if leaves.len() != expected {
                return Err(Error::SizeMismatch { expected, got: leaves.len() });
            }
            let mut level: Vec<f64> = leaves.iter().map(|s| s.seed(p)).collect();
            for h in 1..=depth {
                let arity = if h == depth { root_arity } else { interior };
                level = level
                    .chunks_exact(arity)
                    .map(|kids| -2.0 * p.field + kids.iter().map(|&th| log_l(th, p.beta)).sum::<f64>())
                    .collect();
            }
            Ok(level[0])
        }
    }
}

/// `R` at the root, possibly `0` or `+inf`.
pub fn root_ratio(depth: usize, boundary: &Boundary, p: &ModelParams, root_arity: usize) -> Result<f64> {
    root_log_ratio(depth, boundary, p, root_arity).map(f64::exp)
}

/// Root magnetization `(1 - R) / (1 + R)` with root arity `d`.
pub fn root_magnetization(depth: usize, boundary: &Boundary, p: &ModelParams) -> Result<f64> {
    let theta = root_log_ratio(depth, boundary, p, p.d)?;
    Ok((-0.5 * theta).tanh())
}

/// `log L(e^{b + delta}) - log L(e^b)` without cancellation for small `delta`.
fn log_l_increment(b: f64, delta: f64, beta: f64) -> f64 {
    if delta.abs() > 0.5 || b.is_infinite() {
        return log_l(b + delta, beta) - log_l(b, beta);
    }
    let b2 = 2.0 * beta;
    let lead = -(-2.0 * b2).exp_m1() * sigmoid(b + b2) / (1.0 + (b + delta - b2).exp());
    (lead * delta.exp_m1()).ln_1p()
}

/// `|P(sigma_o = + | eta+) - P(sigma_o = + | eta-)|` where the two boundary
/// conditions at `depth` differ at a single leaf (plus versus minus) and all
/// other leaves are `side`. Under a homogeneous side boundary every leaf is
/// equivalent, so only one root-to-leaf path is materialised. The gap between
/// the two paths is carried directly, so tiny influences keep full relative
/// precision.
pub fn leaf_influence(depth: usize, p: &ModelParams, side: LeafState) -> f64 {
    if depth == 0 {
        return 1.0;
    }
    let mut homogeneous = Vec::with_capacity(depth);
    let mut theta = side.seed(p);
    homogeneous.push(theta);
    for _ in 1..depth {
        theta = -2.0 * p.field + (p.d as f64 - 1.0) * log_l(theta, p.beta);
        homogeneous.push(theta);
    }
    let siblings = |h: usize| if h == depth { p.d as f64 - 1.0 } else { p.d as f64 - 2.0 };
    let base = |h: usize| -2.0 * p.field + siblings(h) * log_l(homogeneous[h - 1], p.beta);
    // minus path value and (plus - minus) gap
    let mut minus = base(1) + log_l(f64::INFINITY, p.beta);
    let mut gap = log_l(f64::NEG_INFINITY, p.beta) - log_l(f64::INFINITY, p.beta);
    for h in 2..=depth {
        let next_gap = log_l_increment(minus, gap, p.beta);
        minus = base(h) + log_l(minus, p.beta);
        gap = next_gap;
    }
    // sigma(u) - sigma(v) = sigma(u) sigma(-v) (1 - e^{v - u}) with u = -theta+, v = -theta-
    let plus = minus + gap;
    (sigmoid(-plus) * sigmoid(minus) * gap.exp_m1()).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceProfile {
    pub depths: Vec<usize>,
    pub influence: Vec<f64>,
    /// `influence[i + 1] / influence[i]`, one entry per consecutive depth pair.
    pub ratios: Vec<f64>,
    pub kappa: f64,
    /// Smallest `K` with `influence(l) <= e^{2 beta d} kappa^{l - K}` over the
    /// measured depths.
    pub fitted_offset: f64,
}

/// Influence of a single flipped leaf on the root for `depths`, in the
/// uniqueness regime only.
pub fn influence_decay(depths: &[usize], p: &ModelParams, side: LeafState) -> Result<InfluenceProfile> {
    let fixed = tree_fixed_points(p);
    let kappa = fixed.kappa.ok_or_else(|| {
        Error::Regime(format!(
            "influence decay needs a unique tree fixed point; found {} at beta={} B={}",
            fixed.roots.len(),
            p.beta,
            p.field
        ))
    })?;
    let influence: Vec<f64> = depths.iter().map(|&l| leaf_influence(l, p, side)).collect();
    let ratios = influence.windows(2).map(|w| w[1] / w[0]).collect();
    let scale = 2.0 * p.beta * p.d as f64;
    let fitted_offset = depths
        .iter()
        .zip(&influence)
        .map(|(&l, &x)| l as f64 - (x.ln() - scale) / kappa.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(InfluenceProfile { depths: depths.to_vec(), influence, ratios, kappa, fitted_offset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::critical_beta;

    fn params(d: usize, beta: f64, b: f64) -> ModelParams {
        ModelParams::new(d, beta, b).unwrap()
    }

    #[test]
    fn l_beta_values() {
        let beta = 0.8;
        assert!((l_beta(1.0, beta).unwrap() - 1.0).abs() < 1e-15);
        assert!((l_beta(0.0, beta).unwrap() - (-2.0 * beta).exp()).abs() < 1e-15);
        assert!((l_beta(f64::INFINITY, beta).unwrap() - (2.0 * beta).exp()).abs() < 1e-12);
        let x = 2.7;
        let direct = ((2.0 * beta).exp() * x + 1.0) / ((2.0 * beta).exp() + x);
        assert!((l_beta(x, beta).unwrap() - direct).abs() < 1e-14);
        assert!(l_beta(-1.0, beta).is_err());
    }

    #[test]
    fn slope_matches_difference_quotient() {
        for beta in [0.3, 1.0, 5.0] {
            for theta in [-3.0, -0.2, 0.0, 1.5, 7.0] {
                let h = 1e-6;
                let fd = (log_l(theta + h, beta) - log_l(theta - h, beta)) / (2.0 * h);
                assert!((fd - log_l_slope(theta, beta)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_field_fixed_points() {
        let high = tree_fixed_points(&params(3, 0.3, 0.0));
        assert_eq!(high.roots.len(), 1);
        assert!((high.roots[0] - 1.0).abs() < 1e-12);
        assert!(high.stable[0]);
        let low = tree_fixed_points(&params(3, 1.0, 0.0));
        assert_eq!(low.roots.len(), 3);
        assert!((low.roots[1] - 1.0).abs() < 1e-12);
        assert!((low.roots[0] * low.roots[2] - 1.0).abs() < 1e-10);
        assert_eq!(low.stable, vec![true, false, true]);
        assert!(low.kappa.is_none());
    }

    #[test]
    fn fixed_points_satisfy_equation() {
        for (d, beta, b) in [(3, 1.0, 0.05), (4, 2.0, 0.1), (5, 0.5, 0.3), (3, 16.0, 2.0)] {
            let p = params(d, beta, b);
            for &r in &tree_fixed_points(&p).roots {
                let image = (-2.0 * b).exp() * l_beta(r, beta).unwrap().powi(d as i32 - 1);
                assert!((r - image).abs() <= 1e-12 * (1.0 + r), "d={d} beta={beta} B={b}: {r} vs {image}");
            }
        }
    }

    #[test]
    fn critical_field_matches_annealed() {
        for d in [3, 4, 5] {
            for shift in [0.2, 1.0] {
                let p = params(d, critical_beta(d) + shift, 0.0);
                let tree = tree_critical_field(&p);
                let annealed = crate::landscape::annealed_bc(&p);
                assert!((tree - annealed).abs() < 1e-9, "d={d}: {tree} vs {annealed}");
                assert!(tree < p.beta * d as f64);
            }
        }
        assert_eq!(tree_critical_field(&params(3, 0.3, 0.0)), 0.0);
        assert!(tree_critical_field(&params(3, critical_beta(3) + 1e-4, 0.0)) < 1e-4);
    }

    #[test]
    fn kappa_below_inverse_branching_above_threshold() {
        let p = params(3, 1.0, 0.0);
        let bc = tree_critical_field(&p);
        let k = kappa(&p.with_field(bc + 0.2)).unwrap();
        assert!(k > 0.0 && k < 0.5, "{k}");
        assert!(kappa(&p.with_field(40.0)).unwrap() < 1e-10);
        assert!(kappa(&p).is_none());
    }

    #[test]
    fn change_of_variables() {
        assert!((map_r_to_t(1.0, 0.7).unwrap() - 0.5).abs() < 1e-15);
        let (beta, t) = (1.0, 0.3);
        let r = map_t_to_r(t, beta).unwrap();
        let l = l_beta(r, beta).unwrap();
        assert!(((1.0 - t) / t - r * l).abs() < 1e-12);
        assert!((crate::landscape::f_beta(t, beta).unwrap() - 1.0 / l).abs() < 1e-12);
        assert!(map_t_to_r(0.0, 1.0).is_err());
        assert!(map_r_to_t(0.0, 1.0).is_err());
    }

    #[test]
    fn depth_one_plus_boundary() {
        let p = params(3, 0.6, 0.2);
        let r = root_ratio(1, &Boundary::Uniform(LeafState::Plus), &p, 3).unwrap();
        let expected = (-2.0 * 0.2 - 2.0 * 0.6 * 3.0f64).exp();
        assert!((r - expected).abs() < 1e-15);
        assert_eq!(root_ratio(0, &Boundary::Uniform(LeafState::Minus), &p, 3).unwrap(), f64::INFINITY);
    }

    #[test]
    fn leaves_boundary_agrees_with_uniform() {
        let p = params(3, 1.1, 0.05);
        for state in [LeafState::Plus, LeafState::Minus, LeafState::Free] {
            let leaves = vec![state; leaf_count(4, 3, 3)];
            let a = root_log_ratio(4, &Boundary::Leaves(leaves), &p, 3).unwrap();
            let b = root_log_ratio(4, &Boundary::Uniform(state), &p, 3).unwrap();
            assert!((a - b).abs() < 1e-12 || a == b);
        }
        assert!(root_log_ratio(2, &Boundary::Leaves(vec![LeafState::Plus; 5]), &p, 3).is_err());
    }

    #[test]
    fn free_boundary_zero_field_has_zero_magnetization() {
        let p = params(4, 1.3, 0.0);
        assert!(root_magnetization(9, &Boundary::Uniform(LeafState::Free), &p).unwrap().abs() < 1e-14);
    }

    #[test]
    fn deep_boundaries_converge_to_fixed_point_when_unique() {
        let p = params(3, 1.0, 0.0);
        let p = p.with_field(tree_critical_field(&p) + 0.2);
        let fixed = tree_fixed_points(&p);
        let r = fixed.r_star.unwrap();
        // root arity d composes one more factor L(r) onto r = e^{-2B} L(r)^{d-1}
        let target = r * l_beta(r, p.beta).unwrap();
        for state in [LeafState::Plus, LeafState::Minus] {
            let got = root_ratio(40, &Boundary::Uniform(state), &p, 3).unwrap();
            assert!((got - target).abs() < 1e-10, "{state:?}: {got} vs {target}");
        }
    }

    #[test]
    fn influence_matches_direct_difference_at_shallow_depth() {
        let p = params(3, 0.9, 0.4);
        for depth in 1..5 {
            let leaves = leaf_count(depth, 3, 3);
            let mut plus = vec![LeafState::Free; leaves];
            plus[leaves / 2] = LeafState::Plus;
            let mut minus = plus.clone();
            minus[leaves / 2] = LeafState::Minus;
            let prob = |b: Vec<LeafState>| sigmoid(-root_log_ratio(depth, &Boundary::Leaves(b), &p, 3).unwrap());
            let direct = prob(plus) - prob(minus);
            let got = leaf_influence(depth, &p, LeafState::Free);
            assert!((got - direct).abs() < 1e-12 * (1.0 + direct), "depth {depth}: {got} vs {direct}");
        }
    }

    #[test]
    fn influence_at_depth_zero_and_refusal() {
        let p = params(3, 1.0, 0.0);
        assert_eq!(leaf_influence(0, &p, LeafState::Free), 1.0);
        assert!(matches!(influence_decay(&[1, 2], &p, LeafState::Free), Err(Error::Regime(_))));
    }

    #[test]
    fn influence_decays_at_kappa() {
        let beta = critical_beta(3) + 0.5;
        let p = params(3, beta, 0.0);
        let p = p.with_field(tree_critical_field(&p) + 0.2);
        let depths: Vec<usize> = (8..=16).collect();
        let prof = influence_decay(&depths, &p, LeafState::Plus).unwrap();
        assert!(prof.kappa < 0.5);
        for r in &prof.ratios {
            assert!(*r <= prof.kappa * 1.05, "{r} vs {}", prof.kappa);
        }
        let bound = (2.0 * beta * 3.0).exp() * prof.kappa.powf(14.0 - prof.fitted_offset);
        assert!(prof.influence[6] <= bound * (1.0 + 1e-12));
    }
}
