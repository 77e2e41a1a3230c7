//! Time stepping: per-path random streams, the three one-step schemes and
//! the path driver with blow-up and extinction detection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::State;
use crate::models::{LinearPart, Model};
use crate::noise::{diffusion_into, NoiseSpec, WienerIncrement};

/// Independent normal stream keyed by `(master_seed, path_index)`.
///
/// Streams never share state, so a path's increments do not depend on how
/// many other paths run or in what order.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    path_index: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(path_index);
        Self { master_seed, path_index, counter: 0, rng }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// Number of normals drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    fn fill(&mut self, out: &mut [f64], dt: f64) {
        let sd = dt.sqrt();
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *v = sd * z;
        }
        self.counter += out.len() as u64;
    }
}

/// `K` i.i.d. `Normal(0, dt)` draws.
pub fn wiener_increments(rng: &mut RngStream, channels: usize, dt: f64) -> Result<WienerIncrement> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let mut dw = vec![0.0; channels];
    rng.fill(&mut dw, dt);
    Ok(WienerIncrement { dw, dt })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    EulerMaruyama,
    #[default]
    Tamed,
    SemiImplicit,
}

/// How the tamed scheme normalizes the increment `Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taming {
    /// `s + Δ / (1 + |Δ|)`.
    Absolute,
    /// `s + Δ / (1 + |Δ| / (1 + |s|))`; step size relative to the current state.
    #[default]
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub scheme: SchemeKind,
    pub taming: Taming,
    /// Implicitness weight of the semi-implicit scheme (1 = backward Euler, 1/2 = Crank–Nicolson).
    pub theta: f64,
    pub blowup_threshold: f64,
    pub extinction_threshold: f64,
    pub record_stride: usize,
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, scheme: SchemeKind) -> Self {
        let n = (horizon / dt).ceil().max(1.0) as usize;
        Self {
            dt,
            horizon,
            scheme,
            taming: Taming::Relative,
            theta: 1.0,
            blowup_threshold: 1e6,
            extinction_threshold: 1e-6,
            record_stride: (n / 200).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.horizon.is_finite() && self.dt < self.horizon) {
            return Err(Error::invalid(format!("need 0 < dt < T, got dt = {}, T = {}", self.dt, self.horizon)));
        }
        if !(self.blowup_threshold > 1.0 && self.extinction_threshold > 0.0 && self.extinction_threshold < 1.0) {
            return Err(Error::invalid(format!(
                "need blowup_threshold > 1 > extinction_threshold > 0, got {} and {}",
                self.blowup_threshold, self.extinction_threshold
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride must be positive"));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil() as usize
    }

    /// Time after `k` steps; the last step is shortened to land on `T`.
    pub fn time_at(&self, k: usize) -> f64 {
        if k >= self.n_steps() {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    /// Indices of the recorded steps of a path that runs to the horizon.
    pub fn record_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut out: Vec<usize> = (0..n).step_by(self.record_stride).collect();
        out.push(n);
        out
    }

    pub fn time_grid(&self) -> Vec<f64> {
        self.record_steps().into_iter().map(|k| self.time_at(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PathStatus {
    Completed,
    BlownUp { t_blow: f64 },
    Extinct { tau_e: f64 },
}

impl PathStatus {
    pub fn label(&self) -> &'static str {
        match self {
            PathStatus::Completed => "completed",
            PathStatus::BlownUp { .. } => "blown_up",
            PathStatus::Extinct { .. } => "extinct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub h_norms: Vec<f64>,
    pub v_norms: Vec<f64>,
    pub terminal_state: State,
    pub status: PathStatus,
    pub seed: u64,
    pub path_index: u64,
}

#[derive(Debug, Default, Clone)]
struct Workspace {
    drift: Vec<f64>,
    noise: Vec<f64>,
    dw: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize, channels: usize) -> Self {
        Self { drift: vec![0.0; dim], noise: vec![0.0; dim], dw: vec![0.0; channels] }
    }
}

fn ensure_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Overflow)
    }
}

// Advances `values` by one step of length `dt` with increments `ws.dw`.
fn advance(model: &Model, noise: &NoiseSpec, cfg: &SimConfig, values: &mut [f64], dt: f64, ws: &mut Workspace) -> Result<()> {
    let norm = model.h_norm_values(values);
    model.drift_into(values, &mut ws.drift);
    diffusion_into(noise, norm, values, &ws.dw, &mut ws.noise);
    match cfg.scheme {
        SchemeKind::EulerMaruyama => {
            for ((v, d), b) in values.iter_mut().zip(&ws.drift).zip(&ws.noise) {
                *v += d * dt + b;
            }
        }
        SchemeKind::Tamed => {
            for (d, b) in ws.drift.iter_mut().zip(&ws.noise) {
                *d = *d * dt + b;
            }
            ensure_finite(&ws.drift)?;
            let inc = model.h_norm_values(&ws.drift);
            let factor = match cfg.taming {
                Taming::Absolute => 1.0 / (1.0 + inc),
                Taming::Relative => 1.0 / (1.0 + inc / (1.0 + norm)),
            };
            for (v, d) in values.iter_mut().zip(&ws.drift) {
                *v += factor * d;
            }
        }
        SchemeKind::SemiImplicit => {
            let theta = cfg.theta;
            match model.linear_part(values) {
                LinearPart::Scalar(k) => {
                    let x = values[0];
                    let denom = 1.0 - theta * dt * k;
                    if !(denom > 0.0) {
                        return Err(Error::Overflow);
                    }
                    let rhs = x + (1.0 - theta) * dt * k * x + dt * (ws.drift[0] - k * x) + ws.noise[0];
                    values[0] = rhs / denom;
                }
                LinearPart::Banded(a) => {
                    let ax = a.matvec(values);
                    let rhs: Vec<f64> = (0..values.len())
                        .map(|i| values[i] + (1.0 - theta) * dt * ax[i] + dt * (ws.drift[i] - ax[i]) + ws.noise[i])
                        .collect();
                    let next = a.identity_minus(theta * dt).solve(&rhs)?;
                    values.copy_from_slice(&next);
                }
            }
        }
    }
    ensure_finite(values)
}

fn one_step(model: &Model, noise: &NoiseSpec, cfg: &SimConfig, s: &State, w: &WienerIncrement) -> Result<State> {
    model.check_dim(&s.values)?;
    if !s.is_finite() {
        return Err(Error::NonFinite { context: "step input" });
    }
    if w.dw.len() != noise.channels() {
        return Err(Error::Dimension { expected: noise.channels(), actual: w.dw.len() });
    }
    let mut ws = Workspace::new(s.len(), noise.channels());
    ws.dw.copy_from_slice(&w.dw);
    let mut values = s.values.clone();
    advance(model, noise, cfg, &mut values, w.dt, &mut ws)?;
    Ok(State { values, t: s.t + w.dt })
}

fn scheme_cfg(scheme: SchemeKind, taming: Taming, theta: f64) -> SimConfig {
    SimConfig { scheme, taming, theta, ..SimConfig::new(1.0, 2.0, scheme) }
}

/// Euler–Maruyama step `s + drift(s) dt + B(s) dW`. A non-finite result is [`Error::Overflow`].
pub fn step_em(model: &Model, noise: &NoiseSpec, s: &State, dt: f64, w: &WienerIncrement) -> Result<State> {
    let w = WienerIncrement { dw: w.dw.clone(), dt };
    one_step(model, noise, &scheme_cfg(SchemeKind::EulerMaruyama, Taming::Absolute, 1.0), s, &w)
}

/// Tamed step `s + Δ / (1 + |Δ|_H)` with `Δ = drift(s) dt + B(s) dW`.
pub fn step_tamed(model: &Model, noise: &NoiseSpec, s: &State, dt: f64, w: &WienerIncrement) -> Result<State> {
    let w = WienerIncrement { dw: w.dw.clone(), dt };
    one_step(model, noise, &scheme_cfg(SchemeKind::Tamed, Taming::Absolute, 1.0), s, &w)
}

/// Tamed step `s + Δ / (1 + |Δ|_H / (1 + |s|_H))`.
pub fn step_tamed_relative(model: &Model, noise: &NoiseSpec, s: &State, dt: f64, w: &WienerIncrement) -> Result<State> {
    let w = WienerIncrement { dw: w.dw.clone(), dt };
    one_step(model, noise, &scheme_cfg(SchemeKind::Tamed, Taming::Relative, 1.0), s, &w)
}

/// Solves `(I - θ dt A) s⁺ = (I + (1-θ) dt A) s + dt (drift(s) - A s) + B(s) dW`
/// with `A` the model's linearization frozen at `s`.
pub fn step_semi_implicit(model: &Model, noise: &NoiseSpec, s: &State, dt: f64, w: &WienerIncrement, theta: f64) -> Result<State> {
    let w = WienerIncrement { dw: w.dw.clone(), dt };
    one_step(model, noise, &scheme_cfg(SchemeKind::SemiImplicit, Taming::Absolute, theta), s, &w)
}

/// One path advanced step by step; extinct paths stay at zero without
/// drawing further increments.
#[derive(Debug, Clone)]
pub struct PathStepper<'a> {
    model: &'a Model,
    noise: &'a NoiseSpec,
    cfg: &'a SimConfig,
    rng: RngStream,
    values: Vec<f64>,
    ws: Workspace,
    step: usize,
    n_steps: usize,
    status: PathStatus,
    h_norm: f64,
}

impl<'a> PathStepper<'a> {
    pub fn new(model: &'a Model, noise: &'a NoiseSpec, cfg: &'a SimConfig, rng: RngStream, initial: &State) -> Result<Self> {
        cfg.validate()?;
        model.check_dim(&initial.values)?;
        if !initial.is_finite() {
            return Err(Error::NonFinite { context: "initial state" });
        }
        let mut stepper = Self {
            model,
            noise,
            cfg,
            rng,
            values: initial.values.clone(),
            ws: Workspace::new(initial.len(), noise.channels()),
            step: 0,
            n_steps: cfg.n_steps(),
            status: PathStatus::Completed,
            h_norm: model.h_norm_values(&initial.values),
        };
        stepper.classify(0.0);
        Ok(stepper)
    }

    fn classify(&mut self, t: f64) {
        if !(self.h_norm < self.cfg.blowup_threshold) {
            self.status = PathStatus::BlownUp { t_blow: t };
        } else if self.h_norm <= self.cfg.extinction_threshold {
            self.values.iter_mut().for_each(|v| *v = 0.0);
            self.h_norm = 0.0;
            self.status = PathStatus::Extinct { tau_e: t };
        }
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.cfg.time_at(self.step)
    }

    pub fn status(&self) -> PathStatus {
        self.status
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn h_norm(&self) -> f64 {
        self.h_norm
    }

    pub fn is_blown_up(&self) -> bool {
        matches!(self.status, PathStatus::BlownUp { .. })
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.n_steps || self.is_blown_up()
    }

    /// Takes one step. Blown-up or finished paths are left unchanged.
    pub fn advance(&mut self) -> Result<()> {
        if self.is_done() {
            return Ok(());
        }
        let t0 = self.cfg.time_at(self.step);
        self.step += 1;
        let t1 = self.cfg.time_at(self.step);
        if matches!(self.status, PathStatus::Extinct { .. }) {
            return Ok(());
        }
        let dt = t1 - t0;
        self.rng.fill(&mut self.ws.dw, dt);
        let before = self.values.clone();
        match advance(self.model, self.noise, self.cfg, &mut self.values, dt, &mut self.ws) {
            Ok(()) => {
                self.h_norm = self.model.h_norm_values(&self.values);
                self.classify(t1);
            }
            Err(Error::Overflow) => {
                self.values = before;
                self.h_norm = f64::INFINITY;
                self.status = PathStatus::BlownUp { t_blow: t1 };
            }
            Err(e) => return Err(e),
        }
        Ok(())
    }

    pub fn terminal_state(&self) -> State {
        State { values: self.values.clone(), t: self.time() }
    }
}

/// Simulates one path from `initial` to the horizon.
pub fn run_path(model: &Model, noise: &NoiseSpec, cfg: &SimConfig, rng: RngStream, initial: &State) -> Result<TrajectoryRecord> {
    let seed = rng.master_seed();
    let path_index = rng.path_index();
    let mut stepper = PathStepper::new(model, noise, cfg, rng, initial)?;
    let mut times = Vec::new();
    let mut h_norms = Vec::new();
    let mut v_norms = Vec::new();
    let mut record = |st: &PathStepper| {
        times.push(st.time());
        h_norms.push(st.h_norm());
        v_norms.push(if st.h_norm().is_finite() { model.v_norm_values(st.values()) } else { f64::INFINITY });
    };
    record(&stepper);
    while !stepper.is_done() {
        stepper.advance()?;
        let k = stepper.step_index();
        if stepper.is_blown_up() || k % cfg.record_stride == 0 || k == cfg.n_steps() {
            record(&stepper);
        }
    }
    Ok(TrajectoryRecord {
        times,
        h_norms,
        v_norms,
        terminal_state: stepper.terminal_state(),
        status: stepper.status(),
        seed,
        path_index,
    })
}
