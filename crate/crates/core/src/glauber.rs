//! Heat-bath Glauber dynamics for the Ising model on a fixed graph.
//!
//! One discrete step picks a uniform site `I` and resamples `sigma_I` from
//! its conditional law: `+1` with probability `sigmoid(2(beta S_I + B))`,
//! where `S_I` is the neighbour sum with multi-edges weighted by
//! multiplicity and self-loops left out (they are flip-invariant).

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::RegularGraph;
use crate::numerics::{log_sum_exp, sigmoid, KahanSum};
use crate::params::ModelParams;

/// Largest vertex count for [`exact_full_chain`] (4096 states).
pub const MAX_FULL_CHAIN_SITES: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinConfig {
    spins: Vec<i8>,
    plus_count: usize,
    local_fields: Vec<i32>,
}

impl SpinConfig {
    pub fn from_spins(g: &RegularGraph, spins: Vec<i8>) -> Result<Self> {
        if spins.len() != g.n() {
            return Err(Error::SizeMismatch { expected: g.n(), got: spins.len() });
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter("spins must be +1 or -1".into()));
        }
        let plus_count = spins.iter().filter(|&&s| s == 1).count();
        let local_fields = (0..g.n()).map(|i| neighbour_sum(g, &spins, i)).collect();
        Ok(Self { spins, plus_count, local_fields })
    }

    pub fn all_plus(g: &RegularGraph) -> Self {
        Self::from_spins(g, vec![1; g.n()]).expect("valid spins")
    }

    pub fn all_minus(g: &RegularGraph) -> Self {
        Self::from_spins(g, vec![-1; g.n()]).expect("valid spins")
    }

    pub fn random<R: Rng>(g: &RegularGraph, rng: &mut R) -> Self {
        let spins = (0..g.n()).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        Self::from_spins(g, spins).expect("valid spins")
    }

    /// Configuration whose plus set is bit `i` of `mask`.
    pub fn from_mask(g: &RegularGraph, mask: u64) -> Self {
        let spins = (0..g.n()).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect();
        Self::from_spins(g, spins).expect("valid spins")
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn plus_count(&self) -> usize {
        self.plus_count
    }

    pub fn local_field(&self, i: usize) -> i32 {
        self.local_fields[i]
    }

    pub fn magnetization(&self) -> f64 {
        self.plus_count as f64 / self.spins.len() as f64
    }

    /// Caches agree with a recomputation from scratch.
    pub fn is_consistent(&self, g: &RegularGraph) -> bool {
        self.plus_count == self.spins.iter().filter(|&&s| s == 1).count()
            && (0..g.n()).all(|i| self.local_fields[i] == neighbour_sum(g, &self.spins, i))
    }

    /// `sigma_i <= tau_i` for every site.
    pub fn dominated_by(&self, other: &SpinConfig) -> bool {
        self.spins.iter().zip(&other.spins).all(|(a, b)| a <= b)
    }

    fn set(&mut self, g: &RegularGraph, i: usize, s: i8) {
        let old = self.spins[i];
        if old == s {
            return;
        }
        self.spins[i] = s;
        if s == 1 {
            self.plus_count += 1;
        } else {
            self.plus_count -= 1;
        }
        let delta = 2 * s as i32;
        for &j in g.neighbors(i) {
            if j != i {
                self.local_fields[j] += delta;
            }
        }
        debug_assert!(g.neighbors(i).iter().all(|&j| self.local_fields[j] == neighbour_sum(g, &self.spins, j)));
    }

    /// Heat-bath update of site `i` driven by the uniform `u`. Returns the
    /// energy change.
    pub fn heat_bath(&mut self, g: &RegularGraph, p: &ModelParams, i: usize, u: f64) -> f64 {
        let new = if u < flip_up_probability(self.local_fields[i], p) { 1 } else { -1 };
        let old = self.spins[i];
        if new == old {
            return 0.0;
        }
        let s = old as f64;
        let delta_h = 2.0 * p.beta * s * self.local_fields[i] as f64 + 2.0 * p.field * s;
        self.set(g, i, new);
        delta_h
    }
}

fn neighbour_sum(g: &RegularGraph, spins: &[i8], i: usize) -> i32 {
    g.neighbors(i).iter().filter(|&&j| j != i).map(|&j| spins[j] as i32).sum()
}

/// `sigmoid(2 (beta S + B))`, the probability that the updated spin is `+1`.
pub fn flip_up_probability(neighbour_sum: i32, p: &ModelParams) -> f64 {
    sigmoid(2.0 * (p.beta * neighbour_sum as f64 + p.field))
}

/// `H = -beta sum_{i<=j} k_ij sigma_i sigma_j - B sum_i sigma_i`; a self-loop
/// contributes the constant `-beta`.
pub fn hamiltonian(g: &RegularGraph, sigma: &SpinConfig, p: &ModelParams) -> Result<f64> {
    if sigma.spins.len() != g.n() {
        return Err(Error::SizeMismatch { expected: g.n(), got: sigma.spins.len() });
    }
    Ok(hamiltonian_of(g, &sigma.spins, p))
}

fn hamiltonian_of(g: &RegularGraph, spins: &[i8], p: &ModelParams) -> f64 {
    let pair: i64 = g.edges().iter().map(|&(u, v)| (spins[u] * spins[v]) as i64).sum();
    let total: i64 = spins.iter().map(|&s| s as i64).sum();
    -p.beta * pair as f64 - p.field * total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepOutcome {
    pub site: usize,
    pub flipped: bool,
    pub delta_h: f64,
}

/// One heat-bath step at a uniform site.
pub fn glauber_step<R: Rng>(g: &RegularGraph, sigma: &mut SpinConfig, p: &ModelParams, rng: &mut R) -> StepOutcome {
    let site = rng.gen_range(0..g.n());
    let u: f64 = rng.gen();
    let before = sigma.spins[site];
    let delta_h = sigma.heat_bath(g, p, site, u);
    StepOutcome { site, flipped: sigma.spins[site] != before, delta_h }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub steps: u64,
    pub replicas: usize,
    pub record_stride: u64,
}

impl SimConfig {
    pub fn new(seed: u64, steps: u64, replicas: usize, record_stride: u64) -> Result<Self> {
        let cfg = Self { seed, steps, replicas, record_stride };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.replicas == 0 || self.record_stride == 0 {
            return Err(Error::InvalidParameter("steps, replicas and record_stride must be positive".into()));
        }
        Ok(())
    }

    /// Independent stream for one replica.
    pub fn rng(&self, replica: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replica as u64);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Start {
    Plus,
    Minus,
    Random,
}

impl std::str::FromStr for Start {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" => Ok(Start::Plus),
            "minus" => Ok(Start::Minus),
            "random" => Ok(Start::Random),
            other => Err(Error::Parse(format!("unknown start '{other}'"))),
        }
    }
}

fn initial<R: Rng>(g: &RegularGraph, start: Start, rng: &mut R) -> SpinConfig {
    match start {
        Start::Plus => SpinConfig::all_plus(g),
        Start::Minus => SpinConfig::all_minus(g),
        Start::Random => SpinConfig::random(g, rng),
    }
}

/// First-passage observation, possibly censored at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Observation {
    pub replica: usize,
    /// Event time, or the horizon when censored.
    pub time: u64,
    pub censored: bool,
}

/// Monotone grand coupling from all-plus and all-minus driven by shared
/// `(site, uniform)` pairs. Returns one coalescence observation per replica,
/// in replica order. Order preservation is asserted at every recorded stride.
pub fn grand_coupling_run(g: &RegularGraph, p: &ModelParams, sim: &SimConfig) -> Result<Vec<Observation>> {
    sim.validate()?;
    Ok((0..sim.replicas)
        .into_par_iter()
        .map(|replica| {
            let mut rng = sim.rng(replica);
            let mut top = SpinConfig::all_plus(g);
            let mut bottom = SpinConfig::all_minus(g);
            let mut disagree = g.n();
            for t in 1..=sim.steps {
                let site = rng.gen_range(0..g.n());
                let u: f64 = rng.gen();
                let before = top.spins[site] != bottom.spins[site];
                top.heat_bath(g, p, site, u);
                bottom.heat_bath(g, p, site, u);
                let after = top.spins[site] != bottom.spins[site];
                match (before, after) {
                    (true, false) => disagree -= 1,
                    (false, true) => disagree += 1,
                    _ => {}
                }
                if t % sim.record_stride == 0 {
                    assert!(bottom.dominated_by(&top), "monotone coupling lost order at t={t}");
                }
                if disagree == 0 {
                    return Observation { replica, time: t, censored: false };
                }
            }
            Observation { replica, time: sim.steps, censored: true }
        })
        .collect())
}

/// Time for the plus count to reach `threshold` from all-minus, censored at
/// the horizon.
pub fn hitting_time_sim(g: &RegularGraph, p: &ModelParams, threshold: usize, sim: &SimConfig) -> Result<Vec<Observation>> {
    sim.validate()?;
    if threshold > g.n() {
        return Err(Error::InvalidParameter(format!("threshold {threshold} exceeds n = {}", g.n())));
    }
    Ok((0..sim.replicas)
        .into_par_iter()
        .map(|replica| {
            let mut rng = sim.rng(replica);
            let mut sigma = SpinConfig::all_minus(g);
            if sigma.plus_count >= threshold {
                return Observation { replica, time: 0, censored: false };
            }
            for t in 1..=sim.steps {
                glauber_step(g, &mut sigma, p, &mut rng);
                if sigma.plus_count >= threshold {
                    return Observation { replica, time: t, censored: false };
                }
            }
            Observation { replica, time: sim.steps, censored: true }
        })
        .collect())
}

/// As [`hitting_time_sim`], but replica `r` runs on its own configuration-model
/// graph with seed `graph_seed + r`.
pub fn hitting_time_fresh_graphs(
    n: usize,
    p: &ModelParams,
    threshold: usize,
    sim: &SimConfig,
    graph_seed: u64,
) -> Result<Vec<Observation>> {
    sim.validate()?;
    (0..sim.replicas)
        .into_par_iter()
        .map(|replica| {
            let g = crate::graph::sample_configuration_model(n, p.d, graph_seed.wrapping_add(replica as u64))?;
            let mut rng = sim.rng(replica);
            let mut sigma = SpinConfig::all_minus(&g);
            if threshold > n {
                return Err(Error::InvalidParameter(format!("threshold {threshold} exceeds n = {n}")));
            }
            if sigma.plus_count >= threshold {
                return Ok(Observation { replica, time: 0, censored: false });
            }
            for t in 1..=sim.steps {
                glauber_step(&g, &mut sigma, p, &mut rng);
                if sigma.plus_count >= threshold {
                    return Ok(Observation { replica, time: t, censored: false });
                }
            }
            Ok(Observation { replica, time: sim.steps, censored: true })
        })
        .collect()
}

/// Default hitting threshold `ceil(n/2)`.
pub fn majority_threshold(n: usize) -> usize {
    n.div_ceil(2)
}

/// `|sigma_+| / n` at `t = 0, stride, 2 stride, ..` up to the horizon, one
/// series per replica.
pub fn magnetization_trace(g: &RegularGraph, p: &ModelParams, start: Start, sim: &SimConfig) -> Result<Vec<Vec<f64>>> {
    sim.validate()?;
    Ok((0..sim.replicas)
        .into_par_iter()
        .map(|replica| {
            let mut rng = sim.rng(replica);
            let mut sigma = initial(g, start, &mut rng);
            let mut out = Vec::with_capacity((sim.steps / sim.record_stride + 1) as usize);
            out.push(sigma.magnetization());
            for t in 1..=sim.steps {
                glauber_step(g, &mut sigma, p, &mut rng);
                if t % sim.record_stride == 0 {
                    out.push(sigma.magnetization());
                }
            }
            out
        })
        .collect())
}

/// Run a single trajectory, recording the plus count and energy at every
/// stride. Used by the energy-bookkeeping checks.
pub fn energy_trace(g: &RegularGraph, p: &ModelParams, start: Start, sim: &SimConfig, replica: usize) -> Vec<(u64, usize, f64)> {
    let mut rng = sim.rng(replica);
    let mut sigma = initial(g, start, &mut rng);
    let mut energy = KahanSum::default();
    energy.add(hamiltonian_of(g, &sigma.spins, p));
    let mut out = vec![(0, sigma.plus_count, energy.total())];
    for t in 1..=sim.steps {
        energy.add(glauber_step(g, &mut sigma, p, &mut rng).delta_h);
        if t % sim.record_stride == 0 {
            out.push((t, sigma.plus_count, energy.total()));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullChainAnalysis {
    pub sites: usize,
    pub gap: f64,
    /// Stationary law indexed by plus-set bitmask.
    pub stationary: Vec<f64>,
    /// Exact worst-start `t_mix(1/4)`, when requested.
    pub t_mix_quarter: Option<u64>,
}

/// Dense heat-bath kernel on `{-1,+1}^n` for the log-weights `log_w`
/// (indexed by plus-set bitmask).
pub fn full_chain_kernel(sites: usize, log_w: &[f64]) -> DMatrix<f64> {
    let size = 1usize << sites;
    let mut k = DMatrix::<f64>::zeros(size, size);
    let inv = 1.0 / sites as f64;
    for x in 0..size {
        let mut stay = KahanSum::default();
        stay.add(1.0);
        for i in 0..sites {
            let y = x ^ (1 << i);
            let pxy = inv * sigmoid(log_w[y] - log_w[x]);
            k[(x, y)] = pxy;
            stay.add(-pxy);
        }
        k[(x, x)] = stay.total();
    }
    k
}

/// Exact analysis of the heat-bath chain with stationary law proportional
/// to `exp(log_w)` on `2^sites` states.
pub fn exact_full_chain_from_weights(sites: usize, log_w: &[f64], mixing: bool) -> Result<FullChainAnalysis> {
    if sites > MAX_FULL_CHAIN_SITES {
        return Err(Error::Budget(format!("full chain needs n <= {MAX_FULL_CHAIN_SITES}, got {sites}")));
    }
    let size = 1usize << sites;
    if log_w.len() != size {
        return Err(Error::SizeMismatch { expected: size, got: log_w.len() });
    }
    let total = log_sum_exp(log_w);
    let stationary: Vec<f64> = log_w.iter().map(|w| (w - total).exp()).collect();
    // symmetrised kernel D^{1/2} P D^{-1/2}: off-diagonal 1/(2 n cosh(dw/2))
    let mut s = DMatrix::<f64>::zeros(size, size);
    let inv = 1.0 / sites as f64;
    for x in 0..size {
        let mut stay = KahanSum::default();
        stay.add(1.0);
        for i in 0..sites {
            let y = x ^ (1 << i);
            let dw = log_w[y] - log_w[x];
            s[(x, y)] = inv / (2.0 * (0.5 * dw).cosh());
            stay.add(-inv * sigmoid(dw));
        }
        s[(x, x)] = stay.total();
    }
    let mut ev: Vec<f64> = s.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let gap = 1.0 - ev.get(1).copied().unwrap_or(0.0);
    let t_mix_quarter = if mixing { worst_start_mixing(sites, log_w, &stationary, 0.25) } else { None };
    Ok(FullChainAnalysis { sites, gap, stationary, t_mix_quarter })
}

/// Worst-start TV distance of the rows of `m` to `pi`.
fn worst_tv(m: &DMatrix<f64>, pi: &[f64]) -> f64 {
    (0..m.nrows())
        .map(|x| {
            let mut acc = KahanSum::default();
            for (y, &target) in pi.iter().enumerate() {
                acc.add((m[(x, y)] - target).abs());
            }
            0.5 * acc.total()
        })
        .fold(0.0, f64::max)
}

/// Smallest `t` with worst-start TV `<= eps`, by binary lifting over the
/// dense powers `P^{2^j}`. `None` beyond `2^40` steps.
fn worst_start_mixing(sites: usize, log_w: &[f64], pi: &[f64], eps: f64) -> Option<u64> {
    let kernel = full_chain_kernel(sites, log_w);
    let size = kernel.nrows();
    if worst_tv(&DMatrix::identity(size, size), pi) <= eps {
        return Some(0);
    }
    let mut powers = vec![kernel];
    while worst_tv(powers.last().unwrap(), pi) > eps {
        if powers.len() > 40 {
            return None;
        }
        let last = powers.last().unwrap();
        powers.push(last * last);
    }
    // largest t with TV > eps, built from the top bit down
    let mut current = DMatrix::<f64>::identity(size, size);
    let mut t = 0u64;
    for j in (0..powers.len()).rev() {
        let candidate = &current * &powers[j];
        if worst_tv(&candidate, pi) > eps {
            current = candidate;
            t += 1 << j;
        }
    }
    Some(t + 1)
}

/// Exact analysis of Glauber dynamics on a graph with at most 12 vertices.
pub fn exact_full_chain(g: &RegularGraph, p: &ModelParams, mixing: bool) -> Result<FullChainAnalysis> {
    if g.n() > MAX_FULL_CHAIN_SITES {
        return Err(Error::Budget(format!("full chain needs n <= {MAX_FULL_CHAIN_SITES}, got {}", g.n())));
    }
    let log_w: Vec<f64> = (0..1u64 << g.n())
        .map(|mask| -hamiltonian_of(g, SpinConfig::from_mask(g, mask).spins(), p))
        .collect();
    exact_full_chain_from_weights(g.n(), &log_w, mixing)
}

/// Full chain of the generalised Curie-Weiss model: stationary law
/// proportional to `exp(n F_n(|sigma_+|))`.
pub fn curie_weiss_full_chain(weights: &[f64], mixing: bool) -> Result<FullChainAnalysis> {
    let sites = weights.len() - 1;
    if sites > MAX_FULL_CHAIN_SITES {
        return Err(Error::Budget(format!("full chain needs n <= {MAX_FULL_CHAIN_SITES}, got {sites}")));
    }
    let log_w: Vec<f64> = (0..1u32 << sites).map(|mask| weights[mask.count_ones() as usize]).collect();
    exact_full_chain_from_weights(sites, &log_w, mixing)
}

/// `log T` for the local-mixing constant `T = 80 d^3 chi^3 e^{5 beta d (chi+1)}`,
/// reported only.
pub fn log_local_mixing_constant(d: usize, beta: f64, chi: f64) -> f64 {
    80f64.ln() + 3.0 * (d as f64).ln() + 3.0 * chi.ln() + 5.0 * beta * d as f64 * (chi + 1.0)
}
