//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the
//! process exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use noisereg::conditions::{check_a5, check_a5_star, default_norm_grid};
use noisereg::ensemble::{
    continuity_probe, default_exponents, extinction_ecdf, run_paths, supermartingale_diagnostic, tail_bound_check,
    tail_bound_horizon, EnsembleStats,
};
use noisereg::integrate::{
    run_path, step_em, step_tamed, step_tamed_relative, wiener_increments, PathStatus, RngStream, SchemeKind,
    SimConfig,
};
use noisereg::models::{embedding_constant, make_model, CoercivityProfile, Model, ModelKind};
use noisereg::noise::{adjoint_action_norm_sq, hs_norm_sq, NoiseSpec, WienerIncrement};
use noisereg::stats::ProportionEstimate;
use noisereg::{h_norm, GridSpec, State};
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn scalar_model(c0: f64, source: f64, sink: f64) -> Model {
    make_model(ModelKind::SuperlinearSde { c0, source, sink }, None).unwrap()
}

fn blowups(records: &[noisereg::TrajectoryRecord]) -> usize {
    records.iter().filter(|r| matches!(r.status, PathStatus::BlownUp { .. })).count()
}

fn acc01() -> Outcome {
    let model = scalar_model(0.0, 1.0, 0.0);
    let noise = NoiseSpec::scalar(0.0, 2.0).unwrap();
    let cfg = SimConfig::new(1e-4, 2.0, SchemeKind::SemiImplicit);
    let r = run_path(&model, &noise, &cfg, RngStream::new(0, 0), &State::scalar(1.0)).unwrap();
    match r.status {
        PathStatus::BlownUp { t_blow } => outcome((0.99..=1.0001).contains(&t_blow), format!("t_blow = {t_blow}")),
        s => outcome(false, format!("path ended {}", s.label())),
    }
}

fn acc02() -> Outcome {
    let model = scalar_model(0.0, 0.0, 1.0);
    let noise = NoiseSpec::scalar(0.0, 2.0).unwrap();
    let cfg = SimConfig::new(1e-4, 4.0, SchemeKind::Tamed);
    let r = run_path(&model, &noise, &cfg, RngStream::new(0, 0), &State::scalar(2.0)).unwrap();
    let exact = 2.0 * 2f64.sqrt();
    match r.status {
        PathStatus::Extinct { tau_e } => {
            let rel = (tau_e - exact).abs() / exact;
            outcome(rel <= 0.01, format!("tau_e = {tau_e}, relative error {rel:.2e}"))
        }
        s => outcome(false, format!("path ended {}", s.label())),
    }
}

/// Least-squares slope of `log err` against `log dt`.
fn fitted_order(dts: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn acc03() -> Outcome {
    // dX = 0.5 X dW, X_T = x exp(0.5 W_T - T/8).
    let model = scalar_model(0.0, 0.0, 0.0);
    let noise = NoiseSpec::scalar(0.5, 1.0).unwrap();
    let (t_end, levels, n_paths) = (1.0, [6u32, 7, 8, 9, 10], 200u64);
    let fine_steps = 1usize << 10;
    let fine_dt = t_end / fine_steps as f64;
    let dts: Vec<f64> = levels.iter().map(|l| t_end / (1u64 << l) as f64).collect();
    type Step = fn(&Model, &NoiseSpec, &State, f64, &WienerIncrement) -> noisereg::Result<State>;
    let schemes: [(&str, Step); 3] =
        [("euler_maruyama", step_em), ("tamed", step_tamed), ("tamed_relative", step_tamed_relative)];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, step) in schemes {
        let mut errs = vec![0.0; levels.len()];
        for p in 0..n_paths {
            let mut rng = RngStream::new(3, p);
            let fine: Vec<f64> =
                (0..fine_steps).map(|_| wiener_increments(&mut rng, 1, fine_dt).unwrap().dw[0]).collect();
            let w_t: f64 = fine.iter().sum();
            let exact = (0.5 * w_t - t_end / 8.0).exp();
            for (li, &l) in levels.iter().enumerate() {
                let block = 1usize << (10 - l);
                let dt = dts[li];
                let mut s = State::scalar(1.0);
                for chunk in fine.chunks(block) {
                    let w = WienerIncrement { dw: vec![chunk.iter().sum()], dt };
                    s = step(&model, &noise, &s, dt, &w).unwrap();
                }
                errs[li] += (s.values[0] - exact).abs() / n_paths as f64;
            }
        }
        let order = fitted_order(&dts, &errs);
        pass &= order >= 0.45;
        parts.push(format!("{name} order {order:.3}"));
    }
    outcome(pass, parts.join(", "))
}

fn scalar_blowup_fraction(m: f64, n_paths: usize) -> ProportionEstimate {
    let model = scalar_model(1.0, 1.0, 0.0);
    let noise = NoiseSpec::scalar(1.0, m).unwrap();
    let cfg = SimConfig::new(1e-4, 5.0, SchemeKind::Tamed);
    let recs = run_paths(&model, &noise, &cfg, &State::scalar(1.0), n_paths, 2024).unwrap();
    ProportionEstimate::new(blowups(&recs), n_paths)
}

fn acc04() -> Outcome {
    let e = scalar_blowup_fraction(2.0, 1000);
    outcome(
        e.estimate <= 0.01 && e.upper <= 0.02,
        format!("blow-up fraction {} ({} of 1000), Wilson upper {:.4}", e.estimate, e.successes, e.upper),
    )
}

fn acc05() -> Outcome {
    let linear = scalar_blowup_fraction(1.0, 1000);
    let quadratic = scalar_blowup_fraction(2.0, 1000);
    let gap = linear.estimate - quadratic.estimate;
    outcome(gap >= 0.2, format!("m=1: {}, m=2: {}, gap {gap:.3}", linear.estimate, quadratic.estimate))
}

fn acc06() -> Outcome {
    let grid = default_norm_grid();
    let eta = 1.5;
    let mut disagreements = 0;
    // C0 = i/10, γ = j/5: C0 + γ <= 1.5 γ  <=>  i <= j.
    for i in 1..=10u32 {
        for j in 1..=10u32 {
            let c0 = i as f64 / 10.0;
            let gamma = j as f64 / 5.0;
            let profile = CoercivityProfile { alpha: 2.0, delta: 1.0, g_coeff: c0, g_exponent: 2.0, additive: None };
            let noise = NoiseSpec::uniform(gamma, 1.0, 1).unwrap();
            let r = check_a5(&profile, &noise, eta, &grid).unwrap();
            if r.holds != (i <= j) {
                disagreements += 1;
            }
        }
    }
    let mut star_failures = 0;
    for r in [0.05, 0.25, 0.5, 0.75, 0.95] {
        let model = make_model(ModelKind::FastDiffusion { r }, Some(GridSpec::new(1.0, 8).unwrap())).unwrap();
        for gamma in [0.01, 0.1, 1.0, 10.0, 100.0] {
            for m in [0.0, 0.5, 1.0] {
                let noise = NoiseSpec::uniform(gamma, m, 1).unwrap();
                let p = model.profile();
                if !check_a5_star(p, &noise, p.alpha, &grid).unwrap().holds {
                    star_failures += 1;
                }
            }
        }
    }
    outcome(
        disagreements == 0 && star_failures == 0,
        format!("A5 sweep disagreements {disagreements}/100, A5* failures {star_failures}/75"),
    )
}

struct FastDiffusionRun {
    extinct: ProportionEstimate,
    horizon: f64,
    stats: EnsembleStats,
    model: Model,
    noise: NoiseSpec,
    x0: State,
}

fn fast_diffusion_run() -> FastDiffusionRun {
    let grid = GridSpec::new(1.0, 32).unwrap();
    let model = make_model(ModelKind::FastDiffusion { r: 0.5 }, Some(grid)).unwrap();
    let noise = NoiseSpec::uniform(1.0, 0.0, 1).unwrap();
    let mode = grid.sine_mode(1);
    let scale = 1.0 / model.h_norm_values(&mode);
    let x0 = State::new(mode.into_iter().map(|v| v * scale).collect());
    let p = *model.profile();
    let c_star = embedding_constant(&model).unwrap();
    let horizon = tail_bound_horizon(1.0, p.alpha, p.delta, c_star, 0.05);
    let cfg = SimConfig::new(1e-3, horizon, SchemeKind::SemiImplicit);
    let recs = run_paths(&model, &noise, &cfg, &x0, 500, 7).unwrap();
    let stats = EnsembleStats::from_records(&recs, &cfg.time_grid(), &default_exponents(&p));
    let ecdf = extinction_ecdf(&stats);
    let extinct = ProportionEstimate::new(ecdf.event_times().len(), 500);
    FastDiffusionRun { extinct, horizon, stats, model, noise, x0 }
}

fn acc07(fd: &FastDiffusionRun) -> Outcome {
    let model = scalar_model(1.0, 1.0, 1.0);
    let noise = NoiseSpec::scalar(1.0, 2.0).unwrap();
    let cfg = SimConfig::new(1e-4, 20.0, SchemeKind::Tamed);
    let recs = run_paths(&model, &noise, &cfg, &State::scalar(2.0), 500, 11).unwrap();
    let extinct = recs.iter().filter(|r| matches!(r.status, PathStatus::Extinct { .. })).count();
    let a = extinct as f64 / 500.0;
    let b = fd.extinct.estimate;
    outcome(
        a >= 0.95 && b >= 0.95,
        format!("(a) scalar extinct {a:.3}; (b) fast diffusion extinct {b:.3} by T = {:.4}", fd.horizon),
    )
}

fn acc08(fd: &FastDiffusionRun) -> Outcome {
    match tail_bound_check(&fd.stats, &fd.model, &fd.noise, &fd.x0) {
        Ok(r) => outcome(
            r.holds && fd.stats.blowup_count == 0,
            format!("{} violations over {} times, c* = {:.6}", r.violations.len(), r.times.len(), r.c_star),
        ),
        Err(e) => outcome(false, format!("refused: {e}")),
    }
}

fn acc09(fd: &FastDiffusionRun) -> Outcome {
    let exponent = 2.0 - fd.model.profile().alpha;
    let r = supermartingale_diagnostic(&fd.stats, exponent).unwrap();
    outcome(r.holds, format!("exponent {exponent}, {} violating pairs", r.violation_count))
}

fn acc10() -> Outcome {
    let grid = GridSpec::new(1.0, 64).unwrap();
    let model = make_model(ModelKind::HeatValidation, Some(grid)).unwrap();
    let noise = NoiseSpec::uniform(0.0, 1.0, 1).unwrap();
    let mut cfg = SimConfig::new(1e-3, 1.0, SchemeKind::SemiImplicit);
    cfg.theta = 0.5;
    let x0 = State::new(grid.sine_mode(1));
    let r = run_path(&model, &noise, &cfg, RngStream::new(0, 0), &x0).unwrap();
    let initial = h_norm(&model, &x0).unwrap();
    let expected = (-grid.laplacian_eigenvalue(1)).exp() * initial;
    let got = *r.h_norms.last().unwrap();
    let rel = (got - expected).abs() / expected;
    outcome(rel <= 1e-3, format!("terminal {got:.8e} vs {expected:.8e}, relative error {rel:.2e}"))
}

fn acc11() -> Outcome {
    let model = scalar_model(1.0, 1.0, 0.0);
    let noise = NoiseSpec::scalar(1.0, 2.0).unwrap();
    let cfg = SimConfig::new(1e-4, 5.0, SchemeKind::Tamed);
    let r = continuity_probe(&model, &noise, &State::scalar(1.0), &[0.1, 0.01, 0.001], &cfg, 200, 13).unwrap();
    let est: Vec<f64> = r.entries.iter().map(|e| e.exceedance.estimate).collect();
    let gap_ok = est[2] <= est[0] - 0.1 || (est[0] == 0.0 && est[2] == 0.0);
    outcome(r.nonincreasing && gap_ok, format!("exceedance {est:?}"))
}

fn acc12() -> Outcome {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
    let grid = GridSpec::new(1.0, 16).unwrap();
    let field = make_model(ModelKind::FastDiffusion { r: 0.5 }, Some(grid)).unwrap();
    let scalar = scalar_model(1.0, 1.0, 0.0);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let (model, noise, s) = if i % 2 == 0 {
            let v: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
            (&field, NoiseSpec::uniform(rng.random_range(0.1..5.0), rng.random_range(0.0..3.0), 3).unwrap(), State::new(v))
        } else {
            let x = rng.random_range(-10.0..10.0);
            (&scalar, NoiseSpec::scalar(rng.random_range(0.1..3.0), rng.random_range(1.0..3.0)).unwrap(), State::scalar(x))
        };
        let adj = adjoint_action_norm_sq(&noise, model, &s).unwrap();
        let hs = hs_norm_sq(&noise, model, &s).unwrap();
        let n = h_norm(model, &s).unwrap();
        let rel = (adj - hs * n * n).abs() / adj.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }

    let model = scalar_model(1.0, 1.0, 0.0);
    let noise = NoiseSpec::scalar(1.0, 2.0).unwrap();
    let cfg = SimConfig::new(1e-3, 5.0, SchemeKind::Tamed);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let recs = pool.install(|| run_paths(&model, &noise, &cfg, &State::scalar(1.0), 200, 99).unwrap());
        serde_json::to_string(&recs).unwrap()
    };
    let one = run(1);
    let four = run(4);
    let again = run(4);
    let reproducible = one == four && four == again;
    outcome(
        worst <= 1e-12 && reproducible,
        format!("rank-one identity worst relative error {worst:.2e}, bitwise reproducible {reproducible}"),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |id: u32, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= limit;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {id:>2}: {} ({}; {:.2} s, limit {} s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    };
    report(1, Duration::from_secs(1), &mut acc01);
    report(2, Duration::from_secs(1), &mut acc02);
    report(3, Duration::from_secs(30), &mut acc03);
    report(4, Duration::from_secs(120), &mut acc04);
    report(5, Duration::from_secs(240), &mut acc05);
    report(6, Duration::from_secs(5), &mut acc06);
    let start = Instant::now();
    let fd = fast_diffusion_run();
    let fd_time = start.elapsed();
    let limit7 = Duration::from_secs(600).saturating_sub(fd_time);
    report(7, limit7, &mut || acc07(&fd));
    report(8, Duration::from_secs(600), &mut || acc08(&fd));
    report(9, Duration::from_secs(600), &mut || acc09(&fd));
    report(10, Duration::from_secs(5), &mut acc10);
    report(11, Duration::from_secs(120), &mut acc11);
    report(12, Duration::from_secs(10), &mut acc12);
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
