//! Runs an experiment plan and writes its artifacts.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::conditions::{
    check_a5, check_a5_star, check_generalized_coercivity, classify_regime, default_norm_grid, ConditionReport,
    RegimeClass,
};
use crate::config::{Analysis, ExperimentPlan, Setup};
use crate::ensemble::{
    blowup_probability, continuity_probe, default_exponents, extinction_ecdf, run_paths, supermartingale_diagnostic,
    tail_bound_check, ContinuityReport, EnsembleStats, SupermartingaleReport, TailBoundReport,
};
use crate::error::{Error, Result};
use crate::integrate::{run_path, RngStream, TrajectoryRecord};
use crate::models::{CoercivityProfile, ModelKind};
use crate::noise::NoiseSpec;
use crate::stats::{quantile_sorted, ProportionEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// Descriptive analyses with no pass criterion.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub analysis: String,
    pub outcome: Outcome,
    pub summary: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_condition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionSummary {
    pub extinct: ProportionEstimate,
    pub median_tau: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub verdicts: Vec<Verdict>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub conditions: Vec<ConditionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<EnsembleStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowup: Option<ProportionEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extinction: Option<ExtinctionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supermartingale: Option<SupermartingaleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<TailBoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuity: Option<ContinuityReport>,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.outcome != Outcome::Fail)
    }
}

/// Default noise-dominance exponent: α for extinction-mode profiles, a value
/// inside the admissible window for the critical scalar case, else 1.5.
pub fn default_eta(profile: &CoercivityProfile, kind: &ModelKind, noise: &NoiseSpec) -> f64 {
    if profile.is_extinction_mode() {
        return profile.alpha;
    }
    if kind.is_scalar() && noise.m() == 1.5 && noise.gamma() > 2.0 {
        return (3.5 + 1.0 / noise.gamma()) / 2.0;
    }
    1.5
}

/// Condition checks for the configured model: (A5) for scalar models;
/// (A3)/(A3*), (A5) and, in extinction mode, (A5*) for fields.
pub fn run_conditions(setup: &Setup) -> Result<Vec<ConditionReport>> {
    let model = &setup.model;
    let profile = model.profile();
    let grid = default_norm_grid();
    let eta = setup.eta.unwrap_or_else(|| default_eta(profile, model.kind(), &setup.noise));
    let mut reports = Vec::new();
    if !model.is_scalar() {
        reports.push(check_generalized_coercivity(model, setup.sample_count, setup.conditions_seed)?);
    }
    let fitted = CoercivityProfile { additive: None, ..*profile };
    reports.push(check_a5(&fitted, &setup.noise, eta, &grid)?);
    if profile.is_extinction_mode() {
        reports.push(check_a5_star(profile, &setup.noise, profile.alpha, &grid)?);
    }
    Ok(reports)
}

fn describe_failure(r: &ConditionReport) -> String {
    match &r.witness {
        Some(w) => format!("{} fails at |x| = {:.6e}: lhs {:.6e} > rhs {:.6e}", r.condition_id, w.s, w.lhs, w.rhs),
        None => format!("{} fails", r.condition_id),
    }
}

fn verdict(analysis: Analysis, outcome: Outcome, summary: String) -> Verdict {
    Verdict { analysis: analysis.name().to_string(), outcome, summary, failing_condition: None }
}

/// Runs every listed analysis (conditions first) and writes the artifacts
/// into the plan's output directory.
pub fn run_experiment(plan: &ExperimentPlan, dump_paths: bool) -> Result<ExperimentResult> {
    let setup = plan.setup()?;
    let out = setup.output_dir.clone();
    fs::create_dir_all(&out)?;
    fs::write(out.join("resolved_config.json"), plan.to_json()?)?;

    let mut result = ExperimentResult { name: plan.name().to_string(), ..Default::default() };
    let mut analyses: Vec<Analysis> = Vec::new();
    for a in &plan.analyses {
        if !analyses.contains(a) {
            analyses.push(*a);
        }
    }
    analyses.sort_by_key(|a| *a != Analysis::Conditions);

    if let ModelKind::SuperlinearSde { c0, .. } = setup.model.kind() {
        result.regime = Some(classify_regime(*c0, setup.noise.m()));
    }

    let needs_paths = dump_paths || analyses.iter().any(Analysis::needs_ensemble);
    let records = if needs_paths {
        Some(run_paths(&setup.model, &setup.noise, &setup.sim, &setup.initial, setup.n_paths, setup.master_seed)?)
    } else {
        None
    };
    if dump_paths {
        if let Some(recs) = &records {
            let dir = out.join("paths");
            fs::create_dir_all(&dir)?;
            for r in recs {
                write_path_csv(&dir.join(format!("path_{:04}.csv", r.path_index)), r)?;
            }
        }
    }
    if analyses.iter().any(Analysis::needs_ensemble) {
        let recs = records.as_deref().expect("paths were simulated");
        let stats = EnsembleStats::from_records(recs, &setup.sim.time_grid(), &default_exponents(setup.model.profile()));
        write_ecdf_csv(&out.join("ecdf.csv"), &stats)?;
        write_moments_csv(&out.join("moments.csv"), &stats)?;
        result.stats = Some(stats);
    }

    for a in analyses {
        let v = run_analysis(a, &setup, &mut result)?;
        result.verdicts.push(v);
    }
    if let Some(tb) = &result.tail_bound {
        write_tail_bound_csv(&out.join("tail_bound.csv"), tb)?;
    }
    if !result.verdicts.is_empty() {
        fs::write(out.join("ensemble_summary.json"), serde_json::to_string_pretty(&result)?)?;
        fs::write(out.join("report.txt"), render_report(&result))?;
    }
    Ok(result)
}

fn run_analysis(a: Analysis, setup: &Setup, result: &mut ExperimentResult) -> Result<Verdict> {
    let model = &setup.model;
    let stats = result.stats.as_ref();
    Ok(match a {
        Analysis::Conditions => match run_conditions(setup) {
            Ok(reports) => {
                let failed = reports.iter().find(|r| !r.holds).cloned();
                let names: Vec<String> = reports.iter().map(|r| r.condition_id.to_string()).collect();
                result.conditions = reports;
                match failed {
                    None => verdict(a, Outcome::Pass, format!("{} hold", names.join(", "))),
                    Some(r) => Verdict {
                        failing_condition: Some(r.condition_id.to_string()),
                        ..verdict(a, Outcome::Fail, describe_failure(&r))
                    },
                }
            }
            Err(e @ Error::UnstableEstimate { .. }) => verdict(a, Outcome::Fail, e.to_string()),
            Err(e) => return Err(e),
        },
        Analysis::Blowup => {
            let est = blowup_probability(stats.expect("ensemble"));
            result.blowup = Some(est);
            let regime = result.regime.map(|r| format!(", regime {r:?}")).unwrap_or_default();
            verdict(
                a,
                Outcome::Info,
                format!(
                    "blow-up probability {:.4} ({} of {}), 95% CI [{:.4}, {:.4}]{regime}",
                    est.estimate, est.successes, est.n, est.lower, est.upper
                ),
            )
        }
        Analysis::Extinction => {
            let stats = stats.expect("ensemble");
            let ecdf = extinction_ecdf(stats);
            let extinct = ProportionEstimate::new(ecdf.event_times().len(), stats.n_paths);
            let median_tau = (!ecdf.event_times().is_empty()).then(|| quantile_sorted(ecdf.event_times(), 0.5));
            result.extinction = Some(ExtinctionSummary { extinct, median_tau });
            let median = median_tau.map(|m| format!(", median extinction time {m:.4}")).unwrap_or_default();
            verdict(
                a,
                Outcome::Info,
                format!("extinct fraction {:.4} ({} of {}){median}", extinct.estimate, extinct.successes, extinct.n),
            )
        }
        Analysis::Supermartingale => {
            let exponent = 2.0 - model.profile().alpha;
            let r = supermartingale_diagnostic(stats.expect("ensemble"), exponent)?;
            let v = verdict(
                a,
                if r.holds { Outcome::Pass } else { Outcome::Fail },
                format!("E|X_t|^{exponent:.4} nonincreasing within 2 stderr: {} violations", r.violation_count),
            );
            result.supermartingale = Some(r);
            v
        }
        Analysis::TailBound => match tail_bound_check(stats.expect("ensemble"), model, &setup.noise, &setup.initial) {
            Ok(r) => {
                let v = verdict(
                    a,
                    if r.holds { Outcome::Pass } else { Outcome::Fail },
                    format!("c* = {:.6}, {} times above the bound", r.c_star, r.violations.len()),
                );
                result.tail_bound = Some(r);
                v
            }
            Err(Error::ConditionFailed(r)) => Verdict {
                failing_condition: Some(r.condition_id.to_string()),
                ..verdict(a, Outcome::Fail, format!("precondition {}", describe_failure(&r)))
            },
            Err(Error::Validation(msg)) => verdict(a, Outcome::Fail, msg),
            Err(e) => return Err(e),
        },
        Analysis::Continuity => {
            let r = continuity_probe(model, &setup.noise, &setup.initial, &setup.deltas, &setup.sim, setup.n_pairs, setup.master_seed)?;
            let parts: Vec<String> =
                r.entries.iter().map(|e| format!("delta {:e}: {:.4}", e.delta, e.exceedance.estimate)).collect();
            let v = verdict(
                a,
                if r.nonincreasing { Outcome::Pass } else { Outcome::Fail },
                format!("exceedance of {} ({})", r.eps_tol, parts.join(", ")),
            );
            result.continuity = Some(r);
            v
        }
    })
}

pub fn render_report(result: &ExperimentResult) -> String {
    let mut s = format!("experiment: {}\n", result.name);
    for v in &result.verdicts {
        let tag = match v.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Info => "INFO",
        };
        s.push_str(&format!("{tag} {}: {}\n", v.analysis, v.summary));
    }
    s.push_str(if result.passed() { "overall: pass\n" } else { "overall: fail\n" });
    s
}

/// Simulates path 0 of the plan and writes it to `paths/path_0000.csv`.
pub fn run_single(plan: &ExperimentPlan) -> Result<TrajectoryRecord> {
    let setup = plan.setup()?;
    let record = run_path(&setup.model, &setup.noise, &setup.sim, RngStream::new(setup.master_seed, 0), &setup.initial)?;
    let dir = setup.output_dir.join("paths");
    fs::create_dir_all(&dir)?;
    fs::write(setup.output_dir.join("resolved_config.json"), plan.to_json()?)?;
    write_path_csv(&dir.join("path_0000.csv"), &record)?;
    Ok(record)
}

pub fn write_path_csv(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "h_norm", "v_norm", "status"])?;
    let last = record.times.len().saturating_sub(1);
    for (i, ((t, h), v)) in record.times.iter().zip(&record.h_norms).zip(&record.v_norms).enumerate() {
        let status = if i == last { record.status.label() } else { "running" };
        w.write_record([t.to_string(), h.to_string(), v.to_string(), status.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_ecdf_csv(path: &Path, stats: &EnsembleStats) -> Result<()> {
    let ecdf = extinction_ecdf(stats);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "extinct_fraction", "blown_up_fraction"])?;
    let n = stats.n_paths as f64;
    for &t in &stats.time_grid {
        let blown = stats.blowup_times.iter().filter(|b| **b <= t).count() as f64 / n;
        w.write_record([t.to_string(), ecdf.eval(t).to_string(), blown.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_moments_csv(path: &Path, stats: &EnsembleStats) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["exponent", "t", "mean", "stderr", "count"])?;
    for c in &stats.norm_moment_curves {
        for (i, t) in stats.time_grid.iter().enumerate() {
            w.write_record([
                c.exponent.to_string(),
                t.to_string(),
                c.mean[i].to_string(),
                c.stderr[i].to_string(),
                c.count[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_tail_bound_csv(path: &Path, r: &TailBoundReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "empirical", "stderr", "bound"])?;
    for i in 0..r.times.len() {
        let bound = r.theoretical_bound[i].map(|b| b.to_string()).unwrap_or_default();
        w.write_record([
            r.times[i].to_string(),
            r.empirical_survival[i].to_string(),
            r.mc_stderr[i].to_string(),
            bound,
        ])?;
    }
    w.flush()?;
    Ok(())
}
