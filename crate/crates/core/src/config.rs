//! Declarative experiment plans: a strict JSON schema whose parsed form has
//! every default filled in, so the echoed plan parses back to itself.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, State};
use crate::integrate::{SchemeKind, SimConfig, Taming};
use crate::models::{make_model, Model, ModelKind};
use crate::noise::NoiseSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelBlock {
    /// Drift `source X² - sink sign(X)|X|^{1/2}`, noise `c0 |X|^{m-1} X dW`.
    SuperlinearSde {
        c0: f64,
        m: f64,
        #[serde(default)]
        source: Option<f64>,
        #[serde(default)]
        sink: Option<f64>,
        #[serde(default)]
        x0: Option<f64>,
    },
    PLaplaceHot {
        p: f64,
        #[serde(default)]
        eps_reg: Option<f64>,
        grid: GridSpec,
        #[serde(default)]
        initial: Option<InitialCondition>,
    },
    FastDiffusion {
        r: f64,
        grid: GridSpec,
        #[serde(default)]
        initial: Option<InitialCondition>,
    },
    SurfaceGrowth {
        grid: GridSpec,
        #[serde(default)]
        initial: Option<InitialCondition>,
    },
    HeatValidation {
        grid: GridSpec,
        #[serde(default)]
        initial: Option<InitialCondition>,
    },
}

/// Field initial data: explicit grid values, or a sine mode scaled to a
/// peak amplitude or to a target H-norm.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sine_mode: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    pub gamma: f64,
    pub m: f64,
    #[serde(default)]
    pub channels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub scheme: Option<SchemeKind>,
    #[serde(default)]
    pub taming: Option<Taming>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub blowup_threshold: Option<f64>,
    #[serde(default)]
    pub extinction_threshold: Option<f64>,
    #[serde(default)]
    pub record_stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    #[serde(default)]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsBlock {
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub sample_count: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuityBlock {
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    #[serde(default)]
    pub n_pairs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Blowup,
    Extinction,
    Supermartingale,
    TailBound,
    Continuity,
    Conditions,
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::Blowup => "blowup",
            Analysis::Extinction => "extinction",
            Analysis::Supermartingale => "supermartingale",
            Analysis::TailBound => "tail_bound",
            Analysis::Continuity => "continuity",
            Analysis::Conditions => "conditions",
        }
    }

    pub fn needs_ensemble(&self) -> bool {
        matches!(self, Analysis::Blowup | Analysis::Extinction | Analysis::Supermartingale | Analysis::TailBound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelBlock,
    #[serde(default)]
    pub noise: Option<NoiseBlock>,
    pub sim: SimBlock,
    #[serde(default)]
    pub ensemble: Option<EnsembleBlock>,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub conditions: Option<ConditionsBlock>,
    #[serde(default)]
    pub continuity: Option<ContinuityBlock>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Everything needed to run a plan, built from the resolved blocks.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: Model,
    pub noise: NoiseSpec,
    pub sim: SimConfig,
    pub initial: State,
    pub n_paths: usize,
    pub master_seed: u64,
    pub eta: Option<f64>,
    pub sample_count: usize,
    pub conditions_seed: u64,
    pub deltas: Vec<f64>,
    pub n_pairs: usize,
    pub output_dir: PathBuf,
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

/// Parses, validates and fills defaults.
pub fn parse_config(text: &str) -> Result<ExperimentPlan> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut plan: ExperimentPlan = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(path, e.into_inner().to_string())
    })?;
    plan.resolve()?;
    plan.setup()?;
    Ok(plan)
}

impl ExperimentPlan {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("experiment")
    }

    fn model_kind(&self) -> (ModelKind, Option<GridSpec>) {
        match &self.model {
            ModelBlock::SuperlinearSde { c0, source, sink, .. } => (
                ModelKind::SuperlinearSde { c0: *c0, source: source.unwrap_or(1.0), sink: sink.unwrap_or(0.0) },
                None,
            ),
            ModelBlock::PLaplaceHot { p, eps_reg, grid, .. } => {
                (ModelKind::PLaplaceHot { p: *p, eps_reg: eps_reg.unwrap_or(1e-8) }, Some(*grid))
            }
            ModelBlock::FastDiffusion { r, grid, .. } => (ModelKind::FastDiffusion { r: *r }, Some(*grid)),
            ModelBlock::SurfaceGrowth { grid, .. } => (ModelKind::SurfaceGrowth, Some(*grid)),
            ModelBlock::HeatValidation { grid, .. } => (ModelKind::HeatValidation, Some(*grid)),
        }
    }

    /// Fills every optional field with its default.
    fn resolve(&mut self) -> Result<()> {
        let scalar = matches!(self.model, ModelBlock::SuperlinearSde { .. });
        match &mut self.model {
            ModelBlock::SuperlinearSde { source, sink, x0, .. } => {
                source.get_or_insert(1.0);
                sink.get_or_insert(0.0);
                x0.get_or_insert(1.0);
            }
            ModelBlock::PLaplaceHot { eps_reg, initial, .. } => {
                eps_reg.get_or_insert(1e-8);
                resolve_initial(initial);
            }
            ModelBlock::FastDiffusion { initial, .. }
            | ModelBlock::SurfaceGrowth { initial, .. }
            | ModelBlock::HeatValidation { initial, .. } => resolve_initial(initial),
        }
        if scalar {
            if self.noise.is_some() {
                return Err(config_error("noise", "superlinear_sde takes its noise from model.c0 and model.m"));
            }
        } else {
            let noise = self.noise.get_or_insert(NoiseBlock { gamma: 0.0, m: 1.0, channels: None });
            noise.channels.get_or_insert(1);
        }

        let sim = &mut self.sim;
        let dt = *sim.dt.get_or_insert(if scalar { 1e-4 } else { 1e-3 });
        sim.scheme.get_or_insert(if scalar { SchemeKind::Tamed } else { SchemeKind::SemiImplicit });
        sim.taming.get_or_insert(Taming::Relative);
        sim.theta.get_or_insert(1.0);
        sim.blowup_threshold.get_or_insert(1e6);
        sim.extinction_threshold.get_or_insert(1e-6);
        if !(dt > 0.0 && sim.horizon > 0.0) {
            return Err(config_error("sim", format!("need dt > 0 and T > 0, got dt = {dt}, T = {}", sim.horizon)));
        }
        let n_steps = (sim.horizon / dt - 1e-9).ceil().max(1.0) as usize;
        sim.record_stride.get_or_insert((n_steps / 200).max(1));

        let blowup = self.analyses.contains(&Analysis::Blowup);
        let ens = self.ensemble.get_or_insert_with(EnsembleBlock::default);
        ens.n_paths.get_or_insert(if blowup { 1000 } else { 500 });
        ens.master_seed.get_or_insert(0);

        if self.analyses.contains(&Analysis::Conditions) {
            let c = self.conditions.get_or_insert_with(ConditionsBlock::default);
            c.sample_count.get_or_insert(200);
            c.seed.get_or_insert(0);
        }
        if self.analyses.contains(&Analysis::Continuity) {
            let c = self.continuity.get_or_insert_with(ContinuityBlock::default);
            c.deltas.get_or_insert_with(|| vec![0.1, 0.01, 0.001]);
            c.n_pairs.get_or_insert(200);
        }
        let name = self.name.get_or_insert_with(|| "experiment".to_string()).clone();
        self.output_dir.get_or_insert_with(|| PathBuf::from("output").join(name));
        Ok(())
    }

    /// Builds the runtime objects and checks analysis compatibility.
    pub fn setup(&self) -> Result<Setup> {
        let (kind, grid) = self.model_kind();
        let model = make_model(kind, grid).map_err(|e| config_error("model", e.to_string()))?;
        let noise = match (&self.model, &self.noise) {
            (ModelBlock::SuperlinearSde { c0, m, .. }, _) => NoiseSpec::scalar(*c0, *m),
            (_, Some(n)) => NoiseSpec::uniform(n.gamma, n.m, n.channels.unwrap_or(1)),
            (_, None) => NoiseSpec::uniform(0.0, 1.0, 1),
        }
        .map_err(|e| config_error("noise", e.to_string()))?;

        let s = &self.sim;
        let sim = SimConfig {
            dt: s.dt.unwrap_or(1e-3),
            horizon: s.horizon,
            scheme: s.scheme.unwrap_or_default(),
            taming: s.taming.unwrap_or_default(),
            theta: s.theta.unwrap_or(1.0),
            blowup_threshold: s.blowup_threshold.unwrap_or(1e6),
            extinction_threshold: s.extinction_threshold.unwrap_or(1e-6),
            record_stride: s.record_stride.unwrap_or(1),
        };
        sim.validate().map_err(|e| config_error("sim", e.to_string()))?;

        let initial = match &self.model {
            ModelBlock::SuperlinearSde { x0, .. } => State::scalar(x0.unwrap_or(1.0)),
            ModelBlock::PLaplaceHot { initial, .. }
            | ModelBlock::FastDiffusion { initial, .. }
            | ModelBlock::SurfaceGrowth { initial, .. }
            | ModelBlock::HeatValidation { initial, .. } => {
                build_initial(&model, initial.as_ref().unwrap_or(&InitialCondition::default()))?
            }
        };

        let alpha = model.profile().alpha;
        for a in &self.analyses {
            if matches!(a, Analysis::TailBound | Analysis::Supermartingale) && !(alpha > 1.0 && alpha < 2.0) {
                return Err(config_error(
                    "analyses",
                    format!("{} requires alpha in (1, 2); {} has alpha = {alpha}", a.name(), model.kind().name()),
                ));
            }
            if *a == Analysis::TailBound && !model.profile().is_extinction_mode() {
                return Err(config_error("analyses", format!("tail_bound requires an extinction-mode model, {} is not", model.kind().name())));
            }
        }
        let ens = self.ensemble.clone().unwrap_or_default();
        let n_paths = ens.n_paths.unwrap_or(500);
        if n_paths == 0 {
            return Err(config_error("ensemble.n_paths", "must be at least 1"));
        }
        let cond = self.conditions.clone().unwrap_or_default();
        if let Some(eta) = cond.eta {
            if !(eta > 1.0 && eta < 2.0) {
                return Err(config_error("conditions.eta", format!("eta must lie in (1, 2), got {eta}")));
            }
        }
        let cont = self.continuity.clone().unwrap_or_default();
        Ok(Setup {
            model,
            noise,
            sim,
            initial,
            n_paths,
            master_seed: ens.master_seed.unwrap_or(0),
            eta: cond.eta,
            sample_count: cond.sample_count.unwrap_or(200),
            conditions_seed: cond.seed.unwrap_or(0),
            deltas: cont.deltas.unwrap_or_else(|| vec![0.1, 0.01, 0.001]),
            n_pairs: cont.n_pairs.unwrap_or(200),
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("output")),
        })
    }
}

fn resolve_initial(initial: &mut Option<InitialCondition>) {
    let ic = initial.get_or_insert_with(InitialCondition::default);
    if ic.values.is_none() {
        ic.sine_mode.get_or_insert(1);
        if ic.amplitude.is_none() {
            ic.h_norm.get_or_insert(1.0);
        }
    }
}

fn build_initial(model: &Model, ic: &InitialCondition) -> Result<State> {
    let grid = model.grid().expect("field model");
    let err = |m: &str| config_error("model.initial", m);
    let base = match (&ic.values, ic.sine_mode) {
        (Some(_), Some(_)) => return Err(err("give either values or sine_mode, not both")),
        (Some(v), None) => {
            if v.len() != grid.n_interior {
                return Err(err(&format!("expected {} values, got {}", grid.n_interior, v.len())));
            }
            if ic.amplitude.is_some() || ic.h_norm.is_some() {
                return Err(err("amplitude and h_norm only apply to sine_mode"));
            }
            return Ok(State::new(v.clone()));
        }
        (None, Some(k)) if k >= 1 => grid.sine_mode(k),
        _ => return Err(err("sine_mode must be at least 1")),
    };
    let scale = match (ic.amplitude, ic.h_norm) {
        (Some(_), Some(_)) => return Err(err("give either amplitude or h_norm, not both")),
        (Some(a), None) => a,
        (None, target) => {
            let n = model.h_norm_values(&base);
            if n == 0.0 {
                return Err(err("sine mode vanishes on this grid"));
            }
            target.unwrap_or(1.0) / n
        }
    };
    Ok(State::new(base.into_iter().map(|v| v * scale).collect()))
}
