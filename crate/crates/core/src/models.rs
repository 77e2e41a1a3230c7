//! The model zoo: drift operators, H- and V-norms, H inner products and
//! the coercivity metadata each model carries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    central_difference, dot, forward_difference, neg_laplacian_solve, second_difference,
    second_difference_into, GridSpec, State,
};
use crate::linalg::{second_difference_matrix, Banded};

/// Model kind together with its physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    /// `dX = (source X² - sink sign(X)|X|^{1/2}) dt + c0 |X|^{m-1} X dW`.
    /// `c0` only enters the coercivity profile; the noise itself lives in
    /// [`crate::noise::NoiseSpec`].
    SuperlinearSde {
        c0: f64,
        #[serde(default = "one")]
        source: f64,
        #[serde(default)]
        sink: f64,
    },
    /// `div(|∇u|^{p-2} ∇u) + u²` with a regularized gradient weight.
    PLaplaceHot {
        p: f64,
        #[serde(default = "default_eps_reg")]
        eps_reg: f64,
    },
    /// `Δ(|u|^{r-1} u)` in the dual Sobolev space.
    FastDiffusion { r: f64 },
    /// `-∂⁴u - ∂²u + ∂²((∂u)²)`.
    SurfaceGrowth,
    /// `∂²u`.
    HeatValidation,
}

fn one() -> f64 {
    1.0
}

fn default_eps_reg() -> f64 {
    1e-8
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::SuperlinearSde { .. } => "superlinear_sde",
            ModelKind::PLaplaceHot { .. } => "p_laplace_hot",
            ModelKind::FastDiffusion { .. } => "fast_diffusion",
            ModelKind::SurfaceGrowth => "surface_growth",
            ModelKind::HeatValidation => "heat_validation",
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, ModelKind::SuperlinearSde { .. })
    }
}

/// `2<A(u),u>_H + delta |u|_V^alpha <= g(|u|_H²) + C` with `g(x) = g_coeff x^g_exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoercivityProfile {
    pub alpha: f64,
    pub delta: f64,
    pub g_coeff: f64,
    pub g_exponent: f64,
    /// `None` lets the noise-dominance checker fit the smallest workable constant.
    pub additive: Option<f64>,
}

impl CoercivityProfile {
    pub fn g(&self, x: f64) -> f64 {
        if self.g_coeff == 0.0 {
            0.0
        } else {
            self.g_coeff * x.powf(self.g_exponent)
        }
    }

    pub fn is_extinction_mode(&self) -> bool {
        self.additive == Some(0.0) && self.g(0.0) == 0.0 && self.alpha > 1.0 && self.alpha < 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("profile alpha must exceed 1, got {}", self.alpha)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!("profile delta must be positive, got {}", self.delta)));
        }
        if !(self.g_coeff >= 0.0 && self.g_exponent >= 0.0) {
            return Err(Error::invalid("g must be nondecreasing: need g_coeff >= 0 and g_exponent >= 0"));
        }
        if let Some(c) = self.additive {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("additive constant must be nonnegative, got {c}")));
            }
        }
        Ok(())
    }

    /// Profile with `g(x) = C x³`, as for the 3D Navier–Stokes system.
    pub fn navier_stokes_3d(c: f64) -> Self {
        Self { alpha: 2.0, delta: 1.0, g_coeff: c, g_exponent: 3.0, additive: Some(0.0) }
    }

    /// Profile with `g(x) = C x²`, as for the quasi-geostrophic equation.
    pub fn quasi_geostrophic(c: f64) -> Self {
        Self { alpha: 2.0, delta: 1.0, g_coeff: c, g_exponent: 2.0, additive: Some(0.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    grid: Option<GridSpec>,
    profile: CoercivityProfile,
    // State-independent stiff part, assembled once for linear-leading models.
    fixed_linear: Option<Banded>,
}

/// Builds a model after validating its parameters. `grid` must be `None`
/// for the scalar model and `Some` for every field model.
pub fn make_model(kind: ModelKind, grid: Option<GridSpec>) -> Result<Model> {
    match (kind.is_scalar(), grid) {
        (true, Some(_)) => return Err(Error::invalid("superlinear_sde is scalar and takes no grid")),
        (false, None) => return Err(Error::invalid(format!("{} requires a grid", kind.name()))),
        _ => {}
    }
    if let Some(g) = grid {
        GridSpec::new(g.length, g.n_interior)?;
    }
    let profile = match kind {
        ModelKind::SuperlinearSde { c0, source, sink } => {
            if !(c0 >= 0.0 && c0.is_finite()) {
                return Err(Error::invalid(format!("c0 must be nonnegative, got {c0}")));
            }
            if !(source.is_finite() && sink.is_finite() && sink >= 0.0) {
                return Err(Error::invalid("source must be finite and sink nonnegative"));
            }
            let c1 = if c0 * c0 > 2.0 { (2.0 + c0 * c0) / 2.0 } else { 3.0 };
            CoercivityProfile { alpha: 2.0, delta: 1.0, g_coeff: c1, g_exponent: 1.5, additive: None }
        }
        ModelKind::PLaplaceHot { p, eps_reg } => {
            if !(p > 1.0 && p < 2.0) {
                return Err(Error::invalid(format!("p_laplace_hot requires 1 < p < 2, got p = {p}")));
            }
            if !(eps_reg >= 0.0 && eps_reg.is_finite()) {
                return Err(Error::invalid(format!("eps_reg must be nonnegative, got {eps_reg}")));
            }
            CoercivityProfile {
                alpha: p,
                delta: 0.5,
                g_coeff: 1.0,
                g_exponent: (4.0 * p - 3.0) / (3.0 * p - 3.0),
                additive: Some(0.0),
            }
        }
        ModelKind::FastDiffusion { r } => {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::invalid(format!("fast_diffusion requires 0 < r < 1, got r = {r}")));
            }
            CoercivityProfile { alpha: r + 1.0, delta: 2.0, g_coeff: 0.0, g_exponent: 1.0, additive: Some(0.0) }
        }
        ModelKind::SurfaceGrowth => {
            CoercivityProfile { alpha: 2.0, delta: 1.0, g_coeff: 1.0, g_exponent: 3.0, additive: None }
        }
        ModelKind::HeatValidation => {
            CoercivityProfile { alpha: 2.0, delta: 2.0, g_coeff: 0.0, g_exponent: 1.0, additive: Some(0.0) }
        }
    };
    let fixed_linear = grid.and_then(|g| {
        let d2 = second_difference_matrix(g.n_interior, g.spacing());
        match kind {
            ModelKind::HeatValidation => Some(d2),
            ModelKind::SurfaceGrowth => Some(d2.matmul(&d2).scaled(-1.0).plus(&d2.scaled(-1.0))),
            _ => None,
        }
    });
    Ok(Model { kind, grid, profile, fixed_linear })
}

/// Frozen-coefficient linearization `A_lin(s)` used by the semi-implicit scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearPart {
    Scalar(f64),
    Banded(Banded),
}

impl Model {
    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn grid(&self) -> Option<&GridSpec> {
        self.grid.as_ref()
    }

    pub fn profile(&self) -> &CoercivityProfile {
        &self.profile
    }

    /// Replaces the coercivity profile, e.g. with an empirically estimated `g_coeff`.
    pub fn with_profile(mut self, profile: CoercivityProfile) -> Result<Self> {
        profile.validate()?;
        self.profile = profile;
        Ok(self)
    }

    pub fn is_scalar(&self) -> bool {
        self.kind.is_scalar()
    }

    pub fn dim(&self) -> usize {
        self.grid.map_or(1, |g| g.n_interior)
    }

    fn spacing(&self) -> f64 {
        self.grid.map_or(1.0, |g| g.spacing())
    }

    pub(crate) fn check_dim(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), actual: u.len() });
        }
        Ok(())
    }

    /// H-norm of raw grid values.
    pub fn h_norm_values(&self, u: &[f64]) -> f64 {
        let h = self.spacing();
        match self.kind {
            ModelKind::SuperlinearSde { .. } => u[0].abs(),
            ModelKind::PLaplaceHot { .. } | ModelKind::HeatValidation => (h * dot(u, u)).sqrt(),
            ModelKind::FastDiffusion { .. } => {
                let w = neg_laplacian_solve(u, h);
                (h * dot(u, &w)).max(0.0).sqrt()
            }
            ModelKind::SurfaceGrowth => {
                let d2 = second_difference(u, h);
                (h * dot(&d2, &d2)).sqrt()
            }
        }
    }

    /// H inner product matching [`Model::h_norm_values`].
    pub fn h_inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let h = self.spacing();
        Ok(match self.kind {
            ModelKind::SuperlinearSde { .. } => a[0] * b[0],
            ModelKind::PLaplaceHot { .. } | ModelKind::HeatValidation => h * dot(a, b),
            ModelKind::FastDiffusion { .. } => h * dot(a, &neg_laplacian_solve(b, h)),
            ModelKind::SurfaceGrowth => {
                h * dot(&second_difference(a, h), &second_difference(b, h))
            }
        })
    }

    pub fn v_norm_values(&self, u: &[f64]) -> f64 {
        let h = self.spacing();
        match self.kind {
            ModelKind::SuperlinearSde { .. } => u[0].abs(),
            ModelKind::PLaplaceHot { p, .. } => lp_norm(&forward_difference(u, h), p, h),
            ModelKind::HeatValidation => lp_norm(&forward_difference(u, h), 2.0, h),
            ModelKind::FastDiffusion { r } => lp_norm(u, r + 1.0, h),
            ModelKind::SurfaceGrowth => {
                let d2 = second_difference(u, h);
                let d4 = second_difference(&d2, h);
                (h * dot(&d4, &d4)).sqrt()
            }
        }
    }

    pub(crate) fn drift_into(&self, u: &[f64], out: &mut [f64]) {
        let h = self.spacing();
        match self.kind {
            ModelKind::SuperlinearSde { source, sink, .. } => {
                let x = u[0];
                out[0] = source * x * x - sink * x.signum() * x.abs().sqrt();
                if x == 0.0 {
                    out[0] = 0.0;
                }
            }
            ModelKind::HeatValidation => second_difference_into(u, h, out),
            ModelKind::PLaplaceHot { p, eps_reg } => {
                let flux = p_laplace_flux(u, h, p, eps_reg);
                for i in 0..u.len() {
                    out[i] = (flux[i + 1] - flux[i]) / h + u[i] * u[i];
                }
            }
            ModelKind::FastDiffusion { r } => {
                let phi: Vec<f64> = u.iter().map(|&v| signed_pow(v, r)).collect();
                second_difference_into(&phi, h, out);
            }
            ModelKind::SurfaceGrowth => {
                let d2 = second_difference(u, h);
                let d4 = second_difference(&d2, h);
                let grad_sq: Vec<f64> = central_difference(u, h).iter().map(|g| g * g).collect();
                let nl = second_difference(&grad_sq, h);
                for i in 0..u.len() {
                    out[i] = -d4[i] - d2[i] + nl[i];
                }
            }
        }
    }

    /// Linearization frozen at `u`; `drift(u) - A_lin u` is treated explicitly.
    pub fn linear_part(&self, u: &[f64]) -> LinearPart {
        if let Some(m) = &self.fixed_linear {
            return LinearPart::Banded(m.clone());
        }
        let h = self.spacing();
        match self.kind {
            ModelKind::SuperlinearSde { source, sink, .. } => {
                let x = u[0];
                let k = if x == 0.0 { 0.0 } else { source * x - sink / x.abs().sqrt() };
                LinearPart::Scalar(k)
            }
            ModelKind::PLaplaceHot { p, eps_reg } => {
                let n = u.len();
                let d = forward_difference(u, h);
                let w: Vec<f64> = d.iter().map(|g| (g * g + eps_reg * eps_reg).powf((p - 2.0) / 2.0)).collect();
                let mut m = Banded::zeros(n, 1, 1);
                let inv = 1.0 / (h * h);
                for i in 0..n {
                    m.set(i, i, -(w[i] + w[i + 1]) * inv);
                    if i > 0 {
                        m.set(i, i - 1, w[i] * inv);
                    }
                    if i + 1 < n {
                        m.set(i, i + 1, w[i + 1] * inv);
                    }
                }
                LinearPart::Banded(m)
            }
            ModelKind::FastDiffusion { r } => {
                let n = u.len();
                let cap = FAST_DIFFUSION_FLOOR.powf(r - 1.0);
                let c: Vec<f64> = u
                    .iter()
                    .map(|v| if v.abs() < FAST_DIFFUSION_FLOOR { cap } else { v.abs().powf(r - 1.0) })
                    .collect();
                let mut m = Banded::zeros(n, 1, 1);
                let inv = 1.0 / (h * h);
                for i in 0..n {
                    m.set(i, i, -2.0 * c[i] * inv);
                    if i > 0 {
                        m.set(i, i - 1, c[i - 1] * inv);
                    }
                    if i + 1 < n {
                        m.set(i, i + 1, c[i + 1] * inv);
                    }
                }
                LinearPart::Banded(m)
            }
            ModelKind::HeatValidation | ModelKind::SurfaceGrowth => unreachable!("assembled at construction"),
        }
    }
}

// Below this magnitude the fast-diffusion mobility |u|^{r-1} is capped.
const FAST_DIFFUSION_FLOOR: f64 = 1e-12;

fn signed_pow(v: f64, e: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(e)
    }
}

fn lp_norm(v: &[f64], p: f64, h: f64) -> f64 {
    let s: f64 = v.iter().map(|x| x.abs().powf(p)).sum();
    (h * s).powf(1.0 / p)
}

fn p_laplace_flux(u: &[f64], h: f64, p: f64, eps: f64) -> Vec<f64> {
    forward_difference(u, h)
        .into_iter()
        .map(|g| (g * g + eps * eps).powf((p - 2.0) / 2.0) * g)
        .collect()
}

pub fn h_norm(model: &Model, s: &State) -> Result<f64> {
    model.check_dim(&s.values)?;
    Ok(model.h_norm_values(&s.values))
}

pub fn v_norm(model: &Model, s: &State) -> Result<f64> {
    model.check_dim(&s.values)?;
    Ok(model.v_norm_values(&s.values))
}

/// Drift `A(t, u)`; every model here is autonomous so `t` is unused.
pub fn drift(model: &Model, _t: f64, s: &State) -> Result<Vec<f64>> {
    model.check_dim(&s.values)?;
    if !s.is_finite() {
        return Err(Error::NonFinite { context: "drift input" });
    }
    let mut out = vec![0.0; s.len()];
    model.drift_into(&s.values, &mut out);
    Ok(out)
}

const EMBED_RESTARTS: usize = 50;
const EMBED_ITERS: usize = 500;
const EMBED_RTOL: f64 = 1e-8;
const EMBED_SEED: u64 = 0x5eed_c0de;

/// Largest `c` with `v_norm(u) >= c h_norm(u)` on the discrete space.
pub fn embedding_constant(model: &Model) -> Result<f64> {
    let grid = match model.grid {
        None => return Ok(1.0),
        Some(g) => g,
    };
    match model.kind {
        ModelKind::HeatValidation => return Ok(grid.laplacian_eigenvalue(1).sqrt()),
        ModelKind::SurfaceGrowth => return Ok(grid.laplacian_eigenvalue(1)),
        _ => {}
    }
    let n = grid.n_interior;
    let mut rng = ChaCha8Rng::seed_from_u64(EMBED_SEED);
    let mut best = f64::INFINITY;
    let mut any_converged = false;
    for restart in 0..EMBED_RESTARTS {
        let start: Vec<f64> = if restart == 0 {
            grid.sine_mode(1)
        } else {
            (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
        };
        let (value, converged) = minimize_ratio(model, start);
        any_converged |= converged;
        best = best.min(value);
    }
    if any_converged && best.is_finite() && best > 0.0 {
        Ok(best)
    } else {
        Err(Error::NonConvergence { best })
    }
}

fn ratio_and_gradient(model: &Model, u: &[f64]) -> (f64, Vec<f64>) {
    let h = model.spacing();
    let hn = model.h_norm_values(u);
    let vn = model.v_norm_values(u);
    let ratio = vn / hn;
    let grad_h: Vec<f64> = match model.kind {
        ModelKind::FastDiffusion { .. } => neg_laplacian_solve(u, h).iter().map(|w| h * w / hn).collect(),
        _ => u.iter().map(|v| h * v / hn).collect(),
    };
    let grad_v: Vec<f64> = match model.kind {
        ModelKind::FastDiffusion { r } => u.iter().map(|&v| h * signed_pow(v, r) / vn.powf(r)).collect(),
        ModelKind::PLaplaceHot { p, .. } => {
            let phi: Vec<f64> = forward_difference(u, h).iter().map(|&d| signed_pow(d, p - 1.0)).collect();
            let scale = vn.powf(1.0 - p);
            (0..u.len()).map(|i| scale * (phi[i] - phi[i + 1])).collect()
        }
        _ => unreachable!("closed-form embedding constant"),
    };
    let grad = grad_v.iter().zip(&grad_h).map(|(gv, gh)| (gv - ratio * gh) / hn).collect();
    (ratio, grad)
}

fn normalized(model: &Model, mut u: Vec<f64>) -> Vec<f64> {
    let n = model.h_norm_values(&u);
    for v in u.iter_mut() {
        *v /= n;
    }
    u
}

// Projected gradient descent on the unit H-sphere with a backtracking step.
fn minimize_ratio(model: &Model, start: Vec<f64>) -> (f64, bool) {
    let l2 = |v: &[f64]| dot(v, v).sqrt();
    let mut u = normalized(model, start);
    let (mut r, mut g) = ratio_and_gradient(model, &u);
    let mut step = 0.1;
    for _ in 0..EMBED_ITERS {
        let gn = l2(&g);
        if gn == 0.0 || !gn.is_finite() {
            return (r, true);
        }
        let scale = l2(&u) / gn;
        let mut accepted = None;
        while step > 1e-14 {
            let cand: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a - step * scale * b).collect();
            if model.h_norm_values(&cand) > 0.0 {
                let cand = normalized(model, cand);
                let (rc, gc) = ratio_and_gradient(model, &cand);
                if rc < r {
                    accepted = Some((cand, rc, gc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, rc, gc)) = accepted else {
            return (r, true);
        };
        let rel = (r - rc) / r;
        u = cand;
        r = rc;
        g = gc;
        step = (step * 2.0).min(1.0);
        if rel < EMBED_RTOL {
            return (r, true);
        }
    }
    (r, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(l: f64, n: usize) -> Option<GridSpec> {
        Some(GridSpec::new(l, n).unwrap())
    }

    fn scalar() -> Model {
        make_model(ModelKind::SuperlinearSde { c0: 1.0, source: 1.0, sink: 0.0 }, None).unwrap()
    }

    fn all_field_models(n: usize) -> Vec<Model> {
        vec![
            make_model(ModelKind::PLaplaceHot { p: 1.5, eps_reg: 1e-8 }, grid(1.0, n)).unwrap(),
            make_model(ModelKind::FastDiffusion { r: 0.5 }, grid(1.0, n)).unwrap(),
            make_model(ModelKind::SurfaceGrowth, grid(1.0, n)).unwrap(),
            make_model(ModelKind::HeatValidation, grid(1.0, n)).unwrap(),
        ]
    }

    #[test]
    fn scalar_norms_and_drift() {
        let m = scalar();
        assert_eq!(h_norm(&m, &State::scalar(-3.0)).unwrap(), 3.0);
        assert_eq!(drift(&m, 0.0, &State::scalar(3.0)).unwrap(), vec![9.0]);
        assert_eq!(embedding_constant(&m).unwrap(), 1.0);
    }

    #[test]
    fn p_laplace_two_cell_v_norm() {
        let m = make_model(ModelKind::PLaplaceHot { p: 1.5, eps_reg: 1e-8 }, grid(2.0, 1)).unwrap();
        let v = v_norm(&m, &State::new(vec![1.0])).unwrap();
        assert!((v - 2f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(h_norm(&m, &State::zeros(1)).unwrap(), 0.0);
    }

    #[test]
    fn fast_diffusion_constant_v_norm() {
        let m = make_model(ModelKind::FastDiffusion { r: 0.5 }, grid(4.0, 3)).unwrap();
        let v = v_norm(&m, &State::new(vec![4.0; 3])).unwrap();
        assert!((v - 24f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(drift(&m, 0.0, &State::zeros(3)).unwrap(), vec![0.0; 3]);
    }

    // Smallest eigenvalue of tridiag(-1, 2, -1)/h² by inverse power iteration,
    // independent of the closed-form cosine formula.
    fn brute_force_lambda1(n: usize, h: f64) -> f64 {
        let mut v = vec![1.0; n];
        let mut lam = 0.0;
        for _ in 0..2000 {
            let w = neg_laplacian_solve(&v, h);
            let norm = dot(&w, &w).sqrt();
            lam = dot(&v, &v).sqrt() / norm;
            v = w.iter().map(|x| x / norm).collect();
        }
        lam
    }

    #[test]
    fn fast_diffusion_h_norm_of_first_eigenvector() {
        for n in 1..=8 {
            let g = GridSpec::new(1.0, n).unwrap();
            let m = make_model(ModelKind::FastDiffusion { r: 0.5 }, Some(g)).unwrap();
            let mode = g.sine_mode(1);
            let l2 = (g.spacing() * dot(&mode, &mode)).sqrt();
            let e1: Vec<f64> = mode.iter().map(|v| v / l2).collect();
            let lam = brute_force_lambda1(n, g.spacing());
            let hn = h_norm(&m, &State::new(e1)).unwrap();
            assert!((hn - 1.0 / lam.sqrt()).abs() < 1e-10, "n={n}: {hn}");
        }
    }

    #[test]
    fn heat_drift_matches_continuum_to_second_order() {
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = GridSpec::new(1.0, n).unwrap();
            let m = make_model(ModelKind::HeatValidation, Some(g)).unwrap();
            let u = g.sine_mode(1);
            let d = drift(&m, 0.0, &State::new(u.clone())).unwrap();
            let k2 = std::f64::consts::PI.powi(2);
            let err = d.iter().zip(&u).map(|(a, b)| (a + k2 * b).abs()).fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn heat_drift_is_exact_on_sine_modes() {
        let g = GridSpec::new(1.0, 20).unwrap();
        let m = make_model(ModelKind::HeatValidation, Some(g)).unwrap();
        for k in 1..=5 {
            let u = g.sine_mode(k);
            let d = drift(&m, 0.0, &State::new(u.clone())).unwrap();
            let lam = g.laplacian_eigenvalue(k);
            for (a, b) in d.iter().zip(&u) {
                assert!((a + lam * b).abs() < 1e-9 * lam);
            }
        }
    }

    #[test]
    fn l2_norm_converges_at_second_order() {
        let target = 0.5f64.sqrt();
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let g = GridSpec::new(1.0, n).unwrap();
                let m = make_model(ModelKind::HeatValidation, Some(g)).unwrap();
                (h_norm(&m, &State::new(g.sine_mode(1))).unwrap() - target).abs()
            })
            .collect();
        // Trapezoid quadrature of sin² is exact here, so errors sit at rounding level.
        for w in errs.windows(2) {
            assert!(w[1] < 1e-12 || (w[0] / w[1]).log2() >= 1.9, "{errs:?}");
        }
    }

    #[test]
    fn zero_state_has_zero_drift() {
        let mut models = all_field_models(6);
        models.push(scalar());
        for m in models {
            let d = drift(&m, 0.0, &State::zeros(m.dim())).unwrap();
            assert!(d.iter().all(|&v| v == 0.0), "{}", m.kind().name());
        }
    }

    #[test]
    fn profiles_follow_model_parameters() {
        let p = make_model(ModelKind::PLaplaceHot { p: 1.5, eps_reg: 1e-8 }, grid(1.0, 4)).unwrap();
        assert_eq!(p.profile().g_exponent, 2.0);
        assert_eq!(p.profile().alpha, 1.5);
        let f = make_model(ModelKind::FastDiffusion { r: 0.5 }, grid(1.0, 4)).unwrap();
        assert_eq!(f.profile().alpha, 1.5);
        assert_eq!(f.profile().g(7.0), 0.0);
        assert_eq!(f.profile().additive, Some(0.0));
        assert!(f.profile().is_extinction_mode());
        let s = make_model(ModelKind::SuperlinearSde { c0: 2.0, source: 1.0, sink: 0.0 }, None).unwrap();
        assert_eq!(s.profile().g_coeff, 3.0);
        assert_eq!(s.profile().g_exponent, 1.5);
    }

    #[test]
    fn parameter_validation() {
        let e = make_model(ModelKind::PLaplaceHot { p: 2.5, eps_reg: 1e-8 }, grid(1.0, 4)).unwrap_err();
        assert!(e.to_string().contains("1 < p < 2"));
        assert!(make_model(ModelKind::FastDiffusion { r: 1.0 }, grid(1.0, 4)).is_err());
        assert!(make_model(ModelKind::HeatValidation, None).is_err());
        assert!(make_model(ModelKind::SuperlinearSde { c0: 1.0, source: 1.0, sink: 0.0 }, grid(1.0, 2)).is_err());
        let m = make_model(ModelKind::HeatValidation, grid(1.0, 4)).unwrap();
        assert!(matches!(h_norm(&m, &State::zeros(3)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn heat_embedding_constant_closed_form() {
        let g = GridSpec::new(1.0, 3).unwrap();
        let m = make_model(ModelKind::HeatValidation, Some(g)).unwrap();
        let h = g.spacing();
        let lam = 2.0 / (h * h) * (1.0 - (std::f64::consts::PI * h).cos());
        assert!((embedding_constant(&m).unwrap() - lam.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fast_diffusion_embedding_constant_matches_brute_force() {
        let g = GridSpec::new(1.0, 4).unwrap();
        let m = make_model(ModelKind::FastDiffusion { r: 0.5 }, Some(g)).unwrap();
        let c = embedding_constant(&m).unwrap();
        let ratio = |u: &[f64]| m.v_norm_values(u) / m.h_norm_values(u);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let u: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut rng)).collect();
            assert!(c <= ratio(&u) * (1.0 + 1e-9));
        }

        // Hyperspherical mesh over directions in R⁴.
        let k = 40;
        let mut mesh_min = f64::INFINITY;
        let pi = std::f64::consts::PI;
        for a in 0..=k {
            for b in 0..=k {
                for d in 0..2 * k {
                    let (t1, t2, t3) = (pi * a as f64 / k as f64, pi * b as f64 / k as f64, pi * d as f64 / k as f64);
                    let u = [
                        t1.cos(),
                        t1.sin() * t2.cos(),
                        t1.sin() * t2.sin() * t3.cos(),
                        t1.sin() * t2.sin() * t3.sin(),
                    ];
                    mesh_min = mesh_min.min(ratio(&u));
                }
            }
        }
        assert!(c <= mesh_min * (1.0 + 1e-9));
        assert!((mesh_min - c) / mesh_min < 0.05, "c*={c}, mesh={mesh_min}");
    }

    fn arb_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, n)
    }

    proptest! {
        #[test]
        fn norms_are_absolutely_homogeneous(u in arb_values(6), c in -5.0f64..5.0) {
            for m in all_field_models(6) {
                let cu: Vec<f64> = u.iter().map(|v| c * v).collect();
                for f in [Model::h_norm_values, Model::v_norm_values] {
                    let lhs = f(&m, &cu);
                    let rhs = c.abs() * f(&m, &u);
                    prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300), "{}", m.kind().name());
                }
            }
        }
    }

    #[test]
    fn embedding_inequality_holds_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut models = all_field_models(8);
        models.push(scalar());
        for m in models {
            let c = embedding_constant(&m).unwrap();
            for _ in 0..1000 {
                let u: Vec<f64> = (0..m.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
                assert!(m.v_norm_values(&u) >= c * m.h_norm_values(&u) * (1.0 - 1e-12), "{}", m.kind().name());
            }
        }
    }
}
