//! Nonlinear multiplicative noise `B(u) y = Σ_k b_k |u|_H^m u <y, g_k>`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::State;
use crate::models::Model;

/// How the exponent `m` enters the noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseForm {
    /// `b_k |u|^m u`.
    Field,
    /// `b_1 |u|^{m-1} u`, the signed power `u^m` of the scalar SDE.
    Scalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    coefficients: Vec<f64>,
    m: f64,
    gamma: f64,
    form: NoiseForm,
}

impl NoiseSpec {
    pub fn new(coefficients: Vec<f64>, m: f64) -> Result<Self> {
        Self::build(coefficients, m, NoiseForm::Field)
    }

    /// `K` equal channels with `Σ b_k² = gamma`.
    pub fn uniform(gamma: f64, m: f64, channels: usize) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("noise gamma must be nonnegative, got {gamma}")));
        }
        if channels == 0 {
            return Err(Error::invalid("noise needs at least one channel"));
        }
        let b = (gamma / channels as f64).sqrt();
        Self::build(vec![b; channels], m, NoiseForm::Field)
    }

    /// Single-channel scalar noise `c0 |u|^{m-1} u dW`.
    pub fn scalar(c0: f64, m: f64) -> Result<Self> {
        if m < 1.0 {
            return Err(Error::invalid(format!("scalar noise exponent must be >= 1, got {m}")));
        }
        Self::build(vec![c0], m, NoiseForm::Scalar)
    }

    fn build(coefficients: Vec<f64>, m: f64, form: NoiseForm) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::invalid("noise needs at least one coefficient"));
        }
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::invalid(format!("noise exponent m must be nonnegative, got {m}")));
        }
        let gamma: f64 = coefficients.iter().map(|b| b * b).sum();
        if !gamma.is_finite() {
            return Err(Error::NonFinite { context: "noise coefficients" });
        }
        Ok(Self { coefficients, m, gamma, form })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn channels(&self) -> usize {
        self.coefficients.len()
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn form(&self) -> NoiseForm {
        self.form
    }

    /// Exponent `p` such that `B(u) y = (Σ b_k y_k) |u|^p u`.
    pub fn norm_exponent(&self) -> f64 {
        match self.form {
            NoiseForm::Field => self.m,
            NoiseForm::Scalar => self.m - 1.0,
        }
    }

    // |u|^p with 0^0 = 1, so B(0) = 0 for any exponent.
    fn amplitude(&self, norm: f64) -> f64 {
        norm.powf(self.norm_exponent())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub dw: Vec<f64>,
    pub dt: f64,
}

pub(crate) fn diffusion_into(noise: &NoiseSpec, norm: f64, u: &[f64], dw: &[f64], out: &mut [f64]) {
    let proj: f64 = noise.coefficients.iter().zip(dw).map(|(b, w)| b * w).sum();
    let scale = proj * noise.amplitude(norm);
    for (o, v) in out.iter_mut().zip(u) {
        *o = scale * v;
    }
}

pub fn diffusion_apply(noise: &NoiseSpec, model: &Model, s: &State, w: &WienerIncrement) -> Result<Vec<f64>> {
    model.check_dim(&s.values)?;
    if w.dw.len() != noise.channels() {
        return Err(Error::Dimension { expected: noise.channels(), actual: w.dw.len() });
    }
    let norm = model.h_norm_values(&s.values);
    let mut out = vec![0.0; s.len()];
    diffusion_into(noise, norm, &s.values, &w.dw, &mut out);
    Ok(out)
}

/// `|B(u)|²_HS = γ |u|^{2p+2}`.
pub fn hs_norm_sq(noise: &NoiseSpec, model: &Model, s: &State) -> Result<f64> {
    model.check_dim(&s.values)?;
    let n = model.h_norm_values(&s.values);
    Ok(noise.gamma * noise.amplitude(n).powi(2) * n * n)
}

/// `|B(u)* u|²_U = γ |u|^{2p+4}`.
pub fn adjoint_action_norm_sq(noise: &NoiseSpec, model: &Model, s: &State) -> Result<f64> {
    model.check_dim(&s.values)?;
    let n = model.h_norm_values(&s.values);
    Ok(noise.gamma * noise.amplitude(n).powi(2) * n.powi(4))
}
