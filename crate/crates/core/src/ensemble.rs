//! Monte Carlo ensembles and the statistics computed from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{check_a5, check_a5_star, default_norm_grid};
use crate::error::{Error, Result};
use crate::grid::State;
use crate::integrate::{run_path, PathStatus, PathStepper, RngStream, SimConfig, TrajectoryRecord};
use crate::models::{embedding_constant, h_norm, CoercivityProfile, Model};
use crate::noise::NoiseSpec;
use crate::stats::{mean_stderr, quantile_sorted, Ecdf, ProportionEstimate};

pub const SUP_NORM_LEVELS: [f64; 3] = [0.5, 0.9, 0.99];
pub const CONTINUITY_TOLERANCE: f64 = 0.1;

/// Mean and standard error of `h_norm^exponent` over the paths alive at each grid time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    pub exponent: f64,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub count: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileValue {
    pub q: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_paths: usize,
    pub blowup_count: usize,
    pub blowup_times: Vec<f64>,
    pub extinction_times: Vec<f64>,
    pub time_grid: Vec<f64>,
    pub norm_moment_curves: Vec<MomentCurve>,
    /// Quantiles of `sup_t h_norm` over paths that did not blow up.
    pub sup_norm_quantiles: Vec<QuantileValue>,
}

impl EnsembleStats {
    pub fn moment_curve(&self, exponent: f64) -> Option<&MomentCurve> {
        self.norm_moment_curves.iter().find(|c| c.exponent == exponent)
    }

    /// Aggregates records on the shared time grid. Sums run over sorted
    /// values, so the result does not depend on record order.
    pub fn from_records(records: &[TrajectoryRecord], time_grid: &[f64], exponents: &[f64]) -> Self {
        let k = time_grid.len();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); k];
        let mut blowup_times = Vec::new();
        let mut extinction_times = Vec::new();
        let mut sups = Vec::new();
        for rec in records {
            let usable = match rec.status {
                PathStatus::BlownUp { t_blow } => {
                    blowup_times.push(t_blow);
                    rec.h_norms.len().saturating_sub(1)
                }
                PathStatus::Extinct { tau_e } => {
                    extinction_times.push(tau_e);
                    rec.h_norms.len()
                }
                PathStatus::Completed => rec.h_norms.len(),
            };
            for (i, h) in rec.h_norms[..usable.min(k)].iter().enumerate() {
                columns[i].push(*h);
            }
            if !matches!(rec.status, PathStatus::BlownUp { .. }) {
                sups.push(rec.h_norms.iter().copied().fold(0.0, f64::max));
            }
        }
        for c in columns.iter_mut() {
            c.sort_by(f64::total_cmp);
        }
        let norm_moment_curves = exponents
            .iter()
            .map(|&e| {
                let mut curve = MomentCurve { exponent: e, mean: Vec::with_capacity(k), stderr: Vec::with_capacity(k), count: Vec::with_capacity(k) };
                for col in &columns {
                    let mut vals: Vec<f64> = col.iter().map(|h| if *h == 0.0 { 0.0 } else { h.powf(e) }).collect();
                    vals.sort_by(f64::total_cmp);
                    let (m, se) = mean_stderr(&vals);
                    curve.mean.push(m);
                    curve.stderr.push(se);
                    curve.count.push(vals.len());
                }
                curve
            })
            .collect();
        blowup_times.sort_by(f64::total_cmp);
        extinction_times.sort_by(f64::total_cmp);
        sups.sort_by(f64::total_cmp);
        let sup_norm_quantiles = SUP_NORM_LEVELS
            .iter()
            .map(|&q| QuantileValue { q, value: quantile_sorted(&sups, q) })
            .collect();
        Self {
            n_paths: records.len(),
            blowup_count: blowup_times.len(),
            blowup_times,
            extinction_times,
            time_grid: time_grid.to_vec(),
            norm_moment_curves,
            sup_norm_quantiles,
        }
    }
}

/// Moment exponents tracked by default: 1, 2 and `2 - α` when `α < 2`.
pub fn default_exponents(profile: &CoercivityProfile) -> Vec<f64> {
    let mut e = vec![1.0, 2.0];
    if profile.alpha < 2.0 {
        e.push(2.0 - profile.alpha);
    }
    e
}

/// Runs paths `0..n_paths` in parallel; results are ordered by path index.
pub fn run_paths(model: &Model, noise: &NoiseSpec, cfg: &SimConfig, initial: &State, n_paths: usize, master_seed: u64) -> Result<Vec<TrajectoryRecord>> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be at least 1"));
    }
    cfg.validate()?;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| run_path(model, noise, cfg, RngStream::new(master_seed, i), initial))
        .collect()
}

pub fn run_ensemble(model: &Model, noise: &NoiseSpec, cfg: &SimConfig, initial: &State, n_paths: usize, master_seed: u64) -> Result<EnsembleStats> {
    let records = run_paths(model, noise, cfg, initial, n_paths, master_seed)?;
    Ok(EnsembleStats::from_records(&records, &cfg.time_grid(), &default_exponents(model.profile())))
}

pub fn blowup_probability(stats: &EnsembleStats) -> ProportionEstimate {
    ProportionEstimate::new(stats.blowup_count, stats.n_paths)
}

pub fn extinction_ecdf(stats: &EnsembleStats) -> Ecdf {
    Ecdf::new(stats.extinction_times.clone(), stats.n_paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub t_early: f64,
    pub t_late: f64,
    pub mean_early: f64,
    pub mean_late: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupermartingaleReport {
    pub exponent: f64,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub violation_count: usize,
    /// The first violations found, capped at [`SupermartingaleReport::MAX_LISTED`].
    pub violations: Vec<MonotonicityViolation>,
    pub holds: bool,
}

impl SupermartingaleReport {
    pub const MAX_LISTED: usize = 100;
}

/// Tests that `t -> E|X_t|^exponent` is nonincreasing within two standard errors.
pub fn supermartingale_diagnostic(stats: &EnsembleStats, exponent: f64) -> Result<SupermartingaleReport> {
    if !(exponent > 0.0 && exponent < 1.0) {
        return Err(Error::invalid(format!("supermartingale exponent must lie in (0, 1), got {exponent}")));
    }
    let curve = stats
        .moment_curve(exponent)
        .ok_or_else(|| Error::invalid(format!("no moment curve for exponent {exponent}")))?;
    let k = curve.mean.len();
    let mut violations = Vec::new();
    let mut count = 0;
    for i in 0..k {
        if curve.count[i] == 0 {
            continue;
        }
        for j in i + 1..k {
            if curve.count[j] == 0 {
                continue;
            }
            if curve.mean[j] > curve.mean[i] + 2.0 * (curve.stderr[i] + curve.stderr[j]) {
                count += 1;
                if violations.len() < SupermartingaleReport::MAX_LISTED {
                    violations.push(MonotonicityViolation {
                        t_early: stats.time_grid[i],
                        t_late: stats.time_grid[j],
                        mean_early: curve.mean[i],
                        mean_late: curve.mean[j],
                    });
                }
            }
        }
    }
    Ok(SupermartingaleReport {
        exponent,
        times: stats.time_grid.clone(),
        mean: curve.mean.clone(),
        stderr: curve.stderr.clone(),
        violation_count: count,
        violations,
        holds: count == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBoundReport {
    pub times: Vec<f64>,
    pub empirical_survival: Vec<f64>,
    pub mc_stderr: Vec<f64>,
    /// `None` where the bound is at least 1 and therefore vacuous.
    pub theoretical_bound: Vec<Option<f64>>,
    pub violations: Vec<f64>,
    pub c_star: f64,
    pub delta: f64,
    pub alpha: f64,
    pub x0_norm: f64,
    pub holds: bool,
}

/// `|x|^{2-α} / (δ c*^α (1 - α/2) t)`.
pub fn tail_bound_value(x_norm: f64, alpha: f64, delta: f64, c_star: f64, t: f64) -> f64 {
    x_norm.powf(2.0 - alpha) / (delta * c_star.powf(alpha) * (1.0 - alpha / 2.0) * t)
}

/// Time at which the tail bound equals `survival`.
pub fn tail_bound_horizon(x_norm: f64, alpha: f64, delta: f64, c_star: f64, survival: f64) -> f64 {
    tail_bound_value(x_norm, alpha, delta, c_star, 1.0) / survival
}

/// Verifies the extinction preconditions for the tail bound; returns the
/// failing report if any.
pub fn extinction_preconditions(model: &Model, noise: &NoiseSpec) -> Result<()> {
    let profile = model.profile();
    if !profile.is_extinction_mode() {
        return Err(Error::invalid(format!(
            "{} is not in extinction mode (need C = 0, g(0) = 0 and alpha in (1, 2), alpha = {})",
            model.kind().name(),
            profile.alpha
        )));
    }
    let grid = default_norm_grid();
    let star = check_a5_star(profile, noise, profile.alpha, &grid)?;
    if !star.holds {
        return Err(Error::ConditionFailed(Box::new(star)));
    }
    // Noise dominance with η = α; its additive constant is independent of (A3*).
    let fitted = CoercivityProfile { additive: None, ..*profile };
    let a5 = check_a5(&fitted, noise, profile.alpha, &grid)?;
    if !a5.holds {
        return Err(Error::ConditionFailed(Box::new(a5)));
    }
    Ok(())
}

pub fn tail_bound_check(stats: &EnsembleStats, model: &Model, noise: &NoiseSpec, x0: &State) -> Result<TailBoundReport> {
    extinction_preconditions(model, noise)?;
    if stats.blowup_count > 0 {
        return Err(Error::invalid(format!(
            "{} blow-ups in an extinction-mode ensemble; the scheme is not resolving the dynamics",
            stats.blowup_count
        )));
    }
    let c_star = embedding_constant(model)?;
    let profile = model.profile();
    let x0_norm = h_norm(model, x0)?;
    let ecdf = extinction_ecdf(stats);
    let n = stats.n_paths as f64;
    let mut report = TailBoundReport {
        times: Vec::new(),
        empirical_survival: Vec::new(),
        mc_stderr: Vec::new(),
        theoretical_bound: Vec::new(),
        violations: Vec::new(),
        c_star,
        delta: profile.delta,
        alpha: profile.alpha,
        x0_norm,
        holds: true,
    };
    for &t in stats.time_grid.iter().filter(|t| **t > 0.0) {
        let p = ecdf.survival(t);
        let se = (p * (1.0 - p) / n).sqrt();
        let b = tail_bound_value(x0_norm, profile.alpha, profile.delta, c_star, t);
        let bound = (b < 1.0).then_some(b);
        if let Some(b) = bound {
            if p - 2.0 * se > b {
                report.violations.push(t);
            }
        }
        report.times.push(t);
        report.empirical_survival.push(p);
        report.mc_stderr.push(se);
        report.theoretical_bound.push(bound);
    }
    report.holds = report.violations.is_empty();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityEntry {
    pub delta: f64,
    pub exceedance: ProportionEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub eps_tol: f64,
    pub n_pairs: usize,
    pub entries: Vec<ContinuityEntry>,
    pub nonincreasing: bool,
}

/// Unit-H-norm perturbation direction: the sign of the initial value for
/// scalar models, the first sine mode for fields.
pub fn perturbation_direction(model: &Model, x0: &State) -> Vec<f64> {
    match model.grid() {
        None => vec![if x0.values[0] < 0.0 { -1.0 } else { 1.0 }],
        Some(g) => {
            let mode = g.sine_mode(1);
            let n = model.h_norm_values(&mode);
            mode.into_iter().map(|v| v / n).collect()
        }
    }
}

fn pair_exceeds(model: &Model, noise: &NoiseSpec, cfg: &SimConfig, x0: &State, x1: &State, seed: u64, index: u64) -> Result<bool> {
    let mut a = PathStepper::new(model, noise, cfg, RngStream::new(seed, index), x0)?;
    let mut b = PathStepper::new(model, noise, cfg, RngStream::new(seed, index), x1)?;
    let mut diff = vec![0.0; x0.len()];
    loop {
        match (a.is_blown_up(), b.is_blown_up()) {
            (true, true) if a.step_index() == b.step_index() => return Ok(false),
            (false, false) => {}
            _ => return Ok(true),
        }
        for ((d, p), q) in diff.iter_mut().zip(a.values()).zip(b.values()) {
            *d = q - p;
        }
        if model.h_norm_values(&diff) > CONTINUITY_TOLERANCE {
            return Ok(true);
        }
        if a.is_done() && b.is_done() {
            return Ok(false);
        }
        a.advance()?;
        b.advance()?;
    }
}

/// Estimates `P(sup_t |X^{x0+δd} - X^{x0}|_H > 0.1)` for each `δ` with
/// paired paths driven by identical increments.
pub fn continuity_probe(
    model: &Model,
    noise: &NoiseSpec,
    x0: &State,
    deltas: &[f64],
    cfg: &SimConfig,
    n_pairs: usize,
    master_seed: u64,
) -> Result<ContinuityReport> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
        return Err(Error::invalid("deltas must be nonempty, finite and nonnegative"));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("deltas must be strictly decreasing"));
    }
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be at least 1"));
    }
    model.check_dim(&x0.values)?;
    let dir = perturbation_direction(model, x0);
    let mut entries = Vec::new();
    for &delta in deltas {
        let x1 = State::new(x0.values.iter().zip(&dir).map(|(v, d)| v + delta * d).collect());
        let hits: Vec<bool> = (0..n_pairs as u64)
            .into_par_iter()
            .map(|i| pair_exceeds(model, noise, cfg, x0, &x1, master_seed, i))
            .collect::<Result<_>>()?;
        let k = hits.iter().filter(|h| **h).count();
        entries.push(ContinuityEntry { delta, exceedance: ProportionEstimate::new(k, n_pairs) });
    }
    // Deltas decrease, so exceedance estimates should not increase.
    let nonincreasing = entries.windows(2).all(|w| w[1].exceedance.estimate <= w[0].exceedance.estimate);
    Ok(ContinuityReport { eps_tol: CONTINUITY_TOLERANCE, n_pairs, entries, nonincreasing })
}
