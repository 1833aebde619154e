//! Exact fixed-spin partition functions on small graphs.
//!
//! `Z_{G,k} = sum_{|U| = k} exp(beta |E| - 2 beta e(U, U^c))` is tabulated by
//! a Gray-code walk over all vertex subsets that keeps an exact histogram of
//! cut sizes per subset size. Fields enter only through the tilt `B(2k - n)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{for_each_subset_cut, Multigraph, RegularGraph, MAX_ENUMERATION_VERTICES};
use crate::numerics::{log_binomial, log_sum_exp};
use crate::params::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedSpinTable {
    pub graph_id: String,
    pub n: usize,
    pub beta: f64,
    pub edge_count: usize,
    pub max_degree: usize,
    /// `log Z_{G,k}^{beta,0}` for `k = 0..=n`.
    pub log_z: Vec<f64>,
}

/// Cut-size histogram `hist[k][c] = #{U : |U| = k, e(U, U^c) = c}`.
pub fn cut_histogram(g: &Multigraph) -> Result<Vec<Vec<u64>>> {
    if g.n() > MAX_ENUMERATION_VERTICES {
        return Err(Error::Budget(format!(
            "subset enumeration needs n <= {MAX_ENUMERATION_VERTICES}, got {}",
            g.n()
        )));
    }
    let mut hist = vec![vec![0u64; g.edge_count() + 1]; g.n() + 1];
    for_each_subset_cut(g, |_, size, cut| hist[size][cut] += 1);
    Ok(hist)
}

pub fn fixed_spin_partition_multigraph(g: &Multigraph, beta: f64, graph_id: impl Into<String>) -> Result<FixedSpinTable> {
    let hist = cut_histogram(g)?;
    let base = beta * g.edge_count() as f64;
    let log_z = hist
        .iter()
        .map(|row| {
            let terms: Vec<f64> = row
                .iter()
                .enumerate()
                .filter(|(_, &count)| count > 0)
                .map(|(c, &count)| (count as f64).ln() - 2.0 * beta * c as f64)
                .collect();
            base + log_sum_exp(&terms)
        })
        .collect();
    Ok(FixedSpinTable {
        graph_id: graph_id.into(),
        n: g.n(),
        beta,
        edge_count: g.edge_count(),
        max_degree: g.max_degree(),
        log_z,
    })
}

/// Fixed-spin table of a configuration-model graph with `n <= 24`.
pub fn fixed_spin_partition(g: &RegularGraph, beta: f64) -> Result<FixedSpinTable> {
    let id = match g.seed() {
        Some(s) => format!("cm-n{}-d{}-seed{s}", g.n(), g.d()),
        None => format!("graph-n{}-d{}", g.n(), g.d()),
    };
    fixed_spin_partition_multigraph(&g.to_multigraph(), beta, id)
}

impl FixedSpinTable {
    /// `log Z_{G,k}^{beta,B} = log Z_{G,k}^{beta,0} + B(2k - n)`.
    pub fn log_z_tilted(&self, k: usize, field: f64) -> f64 {
        self.log_z[k] + field * (2.0 * k as f64 - self.n as f64)
    }

    /// `log Z_G^{beta,B}`, summed over all `k`.
    pub fn log_partition(&self, field: f64) -> f64 {
        let terms: Vec<f64> = (0..=self.n).map(|k| self.log_z_tilted(k, field)).collect();
        log_sum_exp(&terms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioCheck {
    pub k: usize,
    pub ell: usize,
    pub log_lower: f64,
    pub log_ratio: f64,
    pub log_upper: f64,
    pub pass: bool,
}

/// `e^{-2 beta d l} C(n-k, l)/C(k+l, l) <= Z_{k+l}/Z_k <= e^{2 beta d l} C(n-k, l)/C(k+l, l)`
/// with `d` the largest degree of the graph, checked in log space.
pub fn ratio_bounds_check(table: &FixedSpinTable, k: usize, ell: usize) -> Result<RatioCheck> {
    if k + ell > table.n {
        return Err(Error::InvalidParameter(format!("k + l = {} exceeds n = {}", k + ell, table.n)));
    }
    let centre = log_binomial(table.n - k, ell) - log_binomial(k + ell, ell);
    let spread = 2.0 * table.beta * table.max_degree as f64 * ell as f64;
    let log_ratio = table.log_z[k + ell] - table.log_z[k];
    let (log_lower, log_upper) = (centre - spread, centre + spread);
    let slack = 1e-9 * (1.0 + log_ratio.abs());
    let pass = log_lower <= log_ratio + slack && log_ratio <= log_upper + slack;
    Ok(RatioCheck { k, ell, log_lower, log_ratio, log_upper, pass })
}

/// Every `(k, l)` pair of a table.
pub fn all_ratio_checks(table: &FixedSpinTable) -> Vec<RatioCheck> {
    let mut out = Vec::new();
    for k in 0..=table.n {
        for ell in 0..=table.n - k {
            out.push(ratio_bounds_check(table, k, ell).expect("indices in range"));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VertexAddCheck {
    pub k: usize,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl VertexAddCheck {
    pub fn pass(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Confirms that `extended` is `base` plus one vertex with at most `d` edges
/// into `base`, and returns those attachment points.
fn extension_edges(base: &Multigraph, extended: &Multigraph, d: usize) -> Result<Vec<usize>> {
    if extended.n() != base.n() + 1 {
        return Err(Error::MalformedExtension(format!(
            "extension has {} vertices, expected {}",
            extended.n(),
            base.n() + 1
        )));
    }
    let v = base.n();
    let mut old: Vec<(usize, usize)> = base.edges().iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut kept = Vec::new();
    let mut attach = Vec::new();
    for &(a, b) in extended.edges() {
        match (a == v, b == v) {
            (true, true) => return Err(Error::MalformedExtension("self-loop at the new vertex".into())),
            (true, false) => attach.push(b),
            (false, true) => attach.push(a),
            (false, false) => kept.push((a.min(b), a.max(b))),
        }
    }
    old.sort_unstable();
    kept.sort_unstable();
    if old != kept {
        return Err(Error::MalformedExtension("edges among the old vertices changed".into()));
    }
    if attach.len() > d {
        return Err(Error::MalformedExtension(format!("new vertex has {} edges, at most {d} allowed", attach.len())));
    }
    Ok(attach)
}

/// `e^{-2 beta d} Z_{G,k} <= Z_{G',k} <= e^{beta d} (Z_{G,k} + Z_{G,k-1})`
/// for every `k = 0..=n+1`, where `G'` adds one vertex to `G`.
pub fn vertex_add_bounds_check(base: &Multigraph, extended: &Multigraph, beta: f64, d: usize) -> Result<Vec<VertexAddCheck>> {
    extension_edges(base, extended, d)?;
    let small = fixed_spin_partition_multigraph(base, beta, "base")?;
    let large = fixed_spin_partition_multigraph(extended, beta, "extended")?;
    let df = d as f64;
    let n = base.n();
    Ok((0..=n + 1)
        .map(|k| {
            let zk = if k <= n { small.log_z[k] } else { f64::NEG_INFINITY };
            let zk1 = if k >= 1 { small.log_z[k - 1] } else { f64::NEG_INFINITY };
            let target = large.log_z[k];
            let slack = 1e-9 * (1.0 + target.abs());
            let lower_ok = zk - 2.0 * beta * df <= target + slack;
            let upper_ok = target <= beta * df + log_sum_exp(&[zk, zk1]) + slack;
            VertexAddCheck { k, lower_ok, upper_ok }
        })
        .collect())
}

/// `phi_n^{beta,B}(t) = (1/n) log Z_n^{beta,B}(t)` with `ceil(n t)` plus spins.
pub fn quenched_phi_n(table: &FixedSpinTable, t: f64, field: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t must lie in [0,1], got {t}")));
    }
    let k = ((table.n as f64 * t).ceil() as usize).min(table.n);
    Ok(table.log_z_tilted(k, field) / table.n as f64)
}

/// Sample mean of `(1/n) log Z_{G,k}^{beta,0}` over an ensemble of tables on
/// the same vertex count, with its standard error.
pub fn ensemble_mean(tables: &[FixedSpinTable]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = tables.first().ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
    let n = first.n;
    if let Some(t) = tables.iter().find(|t| t.n != n) {
        return Err(Error::SizeMismatch { expected: n, got: t.n });
    }
    let m = tables.len() as f64;
    let mut mean = vec![0.0; n + 1];
    let mut se = vec![0.0; n + 1];
    for k in 0..=n {
        let xs: Vec<f64> = tables.iter().map(|t| t.log_z[k] / n as f64).collect();
        let mu = xs.iter().sum::<f64>() / m;
        let var = if tables.len() > 1 { xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
        mean[k] = mu;
        se[k] = (var / m).sqrt();
    }
    Ok((mean, se))
}

/// Estimator at finite `n` of `sup_{0<s<t<1/2} (phi(s) - phi(t)) / (2(t - s))`
/// over grid points `s = i/n`, `t = j/n`, applied to the ensemble-mean
/// fixed-spin pressure at `B = 0`.
pub fn quenched_bc_estimate(tables: &[FixedSpinTable]) -> Result<f64> {
    let (mean, _) = ensemble_mean(tables)?;
    let n = tables[0].n;
    let mut best = f64::NEG_INFINITY;
    // t < 1/2 strictly
    let top = (n - 1) / 2;
    for j in 2..=top {
        for i in 1..j {
            let slope = (mean[i] - mean[j]) / (2.0 * (j - i) as f64 / n as f64);
            best = best.max(slope);
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("n = {n} leaves no grid pairs below 1/2")));
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealedComparison {
    pub n: usize,
    pub samples: usize,
    pub quenched_mean: Vec<f64>,
    pub standard_error: Vec<f64>,
    /// `(1/n) log E Z_{G,k}` under the configuration model.
    pub annealed: Vec<f64>,
    /// `annealed - quenched_mean` per `k`.
    pub gap_by_k: Vec<f64>,
    pub pass: bool,
}

/// Compares the ensemble mean of `(1/n) log Z_{G,k}` against the exact
/// annealed value; Jensen gives `E log Z <= log E Z`, so each `k` must satisfy
/// `mean <= annealed + 1e-9 + 3 SE`. The field of `p` is ignored.
pub fn annealed_dominates_check(tables: &[FixedSpinTable], p: &ModelParams) -> Result<AnnealedComparison> {
    let (mean, se) = ensemble_mean(tables)?;
    let n = tables[0].n;
    if let Some(t) = tables.iter().find(|t| (t.beta - p.beta).abs() > 0.0) {
        return Err(Error::InvalidParameter(format!("table beta {} differs from {}", t.beta, p.beta)));
    }
    let weights = crate::landscape::annealed_log_weights(n, &p.with_field(0.0))?;
    let annealed: Vec<f64> = (0..=n).map(|k| (log_binomial(n, k) + weights[k]) / n as f64).collect();
    let gap_by_k: Vec<f64> = annealed.iter().zip(&mean).map(|(a, q)| a - q).collect();
    let pass = (0..=n).all(|k| mean[k] <= annealed[k] + 1e-9 + 3.0 * se[k]);
    Ok(AnnealedComparison { n, samples: tables.len(), quenched_mean: mean, standard_error: se, annealed, gap_by_k, pass })
}

/// Tables for `samples` configuration-model graphs with seeds
/// `seed, seed+1, ...`, in seed order.
pub fn sample_tables(n: usize, d: usize, beta: f64, samples: usize, seed: u64) -> Result<Vec<FixedSpinTable>> {
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let g = crate::graph::sample_configuration_model(n, d, seed.wrapping_add(i))?;
            fixed_spin_partition(&g, beta)
        })
        .collect()
}

/// `log Z(0) - log Z(n/2)` against the bound `(beta (d/2 - sqrt(d log 2)) - log 2) n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationCheck {
    pub isoperimetric: f64,
    pub meets_isoperimetric_bound: bool,
    pub log_ratio: f64,
    pub log_bound: f64,
    pub pass: bool,
}

pub fn isoperimetric_separation(g: &RegularGraph, beta: f64) -> Result<SeparationCheck> {
    let d = g.d() as f64;
    let n = g.n();
    let iso_bound = d / 2.0 - (d * std::f64::consts::LN_2).sqrt();
    let iso = g.isoperimetric_number()?.value;
    let table = fixed_spin_partition(g, beta)?;
    let log_ratio = table.log_z[0] - table.log_z[n / 2];
    let log_bound = (beta * iso_bound - std::f64::consts::LN_2) * n as f64;
    Ok(SeparationCheck {
        isoperimetric: iso,
        meets_isoperimetric_bound: iso >= iso_bound,
        log_ratio,
        log_bound,
        pass: log_ratio >= log_bound,
    })
}
