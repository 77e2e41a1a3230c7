//! Single-path scalar scenarios: deterministic blow-up, noise that is too
//! weak to prevent it, noise that does, and the same with a sink term.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::State;
use crate::integrate::{PathStatus, PathStepper, RngStream, SchemeKind, SimConfig};
use crate::models::{make_model, ModelKind};
use crate::noise::NoiseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FigureSpec {
    pub name: &'static str,
    pub c0: f64,
    pub m: f64,
    pub source: f64,
    pub sink: f64,
    pub x0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub scheme: SchemeKind,
}

pub const FIGURES: [FigureSpec; 5] = [
    FigureSpec { name: "fig1", c0: 0.0, m: 2.0, source: 1.0, sink: 0.0, x0: 1.0, horizon: 2.0, dt: 1e-4, scheme: SchemeKind::SemiImplicit },
    FigureSpec { name: "fig2", c0: 1.0, m: 1.0, source: 1.0, sink: 0.0, x0: 1.0, horizon: 5.0, dt: 1e-4, scheme: SchemeKind::Tamed },
    FigureSpec { name: "fig3", c0: 1.0, m: 2.0, source: 1.0, sink: 0.0, x0: 1.0, horizon: 5.0, dt: 1e-4, scheme: SchemeKind::Tamed },
    FigureSpec { name: "fig4", c0: 0.0, m: 2.0, source: 1.0, sink: 1.0, x0: 2.0, horizon: 2.0, dt: 1e-4, scheme: SchemeKind::SemiImplicit },
    FigureSpec { name: "fig5", c0: 1.0, m: 2.0, source: 1.0, sink: 1.0, x0: 2.0, horizon: 20.0, dt: 1e-4, scheme: SchemeKind::Tamed },
];

/// Steps between written rows.
const FIGURE_STRIDE: usize = 10;

pub fn figure_spec(name: &str) -> Result<FigureSpec> {
    FIGURES
        .iter()
        .find(|f| f.name == name)
        .copied()
        .ok_or_else(|| Error::Validation(format!("unknown figure `{name}`, expected fig1 to fig5")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureOutcome {
    pub figure: FigureSpec,
    pub seed: u64,
    pub status: PathStatus,
    pub final_value: f64,
    pub path: PathBuf,
}

/// Simulates path 0 of `seed` and writes `t, X_t` to `<out>/<name>_path.csv`.
pub fn run_figure(name: &str, seed: u64, out: &Path) -> Result<FigureOutcome> {
    let spec = figure_spec(name)?;
    let model = make_model(ModelKind::SuperlinearSde { c0: spec.c0, source: spec.source, sink: spec.sink }, None)?;
    let noise = NoiseSpec::scalar(spec.c0, spec.m)?;
    let cfg = SimConfig::new(spec.dt, spec.horizon, spec.scheme);
    let mut stepper = PathStepper::new(&model, &noise, &cfg, RngStream::new(seed, 0), &State::scalar(spec.x0))?;

    fs::create_dir_all(out)?;
    let path = out.join(format!("{name}_path.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["t", "X_t"])?;
    let mut write = |st: &PathStepper| -> Result<()> {
        let x = if st.is_blown_up() { f64::INFINITY } else { st.values()[0] };
        w.write_record([st.time().to_string(), x.to_string()])?;
        Ok(())
    };
    write(&stepper)?;
    while !stepper.is_done() {
        stepper.advance()?;
        if stepper.step_index() % FIGURE_STRIDE == 0 || stepper.is_done() {
            write(&stepper)?;
        }
    }
    w.flush()?;
    Ok(FigureOutcome { figure: spec, seed, status: stepper.status(), final_value: stepper.values()[0], path })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_figures_blow_up_and_noisy_ones_do_not() {
        let dir = tempfile::tempdir().unwrap();
        let f1 = run_figure("fig1", 0, dir.path()).unwrap();
        match f1.status {
            PathStatus::BlownUp { t_blow } => assert!((0.99..=1.0001).contains(&t_blow), "{t_blow}"),
            s => panic!("fig1 ended {s:?}"),
        }
        let f3 = run_figure("fig3", 0, dir.path()).unwrap();
        assert!(!matches!(f3.status, PathStatus::BlownUp { .. }));
        let text = fs::read_to_string(&f3.path).unwrap();
        assert!(text.starts_with("t,X_t\n"));
        assert!(run_figure("fig9", 0, dir.path()).is_err());
    }
}
