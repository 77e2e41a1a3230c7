//! Uniform 1D grids with homogeneous Dirichlet boundaries and the finite
//! difference stencils shared by the field models.
//!
//! Interior node `i` (0-based) sits at `x = (i + 1) h`; the two boundary
//! nodes are ghosts fixed at zero. Edge `e` joins node `e - 1` and node `e`
//! in ghost-inclusive numbering, so there are `n + 1` edges.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub length: f64,
    pub n_interior: usize,
}

impl GridSpec {
    pub fn new(length: f64, n_interior: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid(format!("grid length must be positive, got {length}")));
        }
        if n_interior == 0 {
            return Err(Error::invalid("grid needs at least one interior point"));
        }
        Ok(Self { length, n_interior })
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.n_interior as f64 + 1.0)
    }

    /// Interior node coordinates.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (1..=self.n_interior).map(|i| i as f64 * h).collect()
    }

    /// k-th eigenvalue (k >= 1) of the positive Dirichlet operator `-D²`.
    pub fn laplacian_eigenvalue(&self, k: usize) -> f64 {
        let h = self.spacing();
        2.0 / (h * h) * (1.0 - (k as f64 * PI * h / self.length).cos())
    }

    /// Sampled `sin(k pi x / L)`; an exact eigenvector of the discrete Laplacian.
    pub fn sine_mode(&self, k: usize) -> Vec<f64> {
        self.nodes()
            .into_iter()
            .map(|x| (k as f64 * PI * x / self.length).sin())
            .collect()
    }
}

/// A discretized state: interior grid values (one value for scalar models)
/// at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub values: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, t: 0.0 }
    }

    pub fn scalar(x: f64) -> Self {
        Self::new(vec![x])
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[inline]
fn at(u: &[f64], i: isize) -> f64 {
    if i < 0 || i as usize >= u.len() {
        0.0
    } else {
        u[i as usize]
    }
}

/// Three-point second difference `(u[i-1] - 2u[i] + u[i+1]) / h²`.
pub fn second_difference(u: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    second_difference_into(u, h, &mut out);
    out
}

pub fn second_difference_into(u: &[f64], h: f64, out: &mut [f64]) {
    let inv = 1.0 / (h * h);
    for i in 0..u.len() {
        let ii = i as isize;
        out[i] = (at(u, ii - 1) - 2.0 * u[i] + at(u, ii + 1)) * inv;
    }
}

/// Forward differences on all `n + 1` edges, ghosts included.
pub fn forward_difference(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len() as isize;
    (0..=n).map(|e| (at(u, e) - at(u, e - 1)) / h).collect()
}

/// Central first difference at interior nodes.
pub fn central_difference(u: &[f64], h: f64) -> Vec<f64> {
    (0..u.len() as isize)
        .map(|i| (at(u, i + 1) - at(u, i - 1)) / (2.0 * h))
        .collect()
}

/// Solves `(-D²) x = rhs` with the Thomas algorithm. The matrix is SPD and
/// diagonally dominant, so no pivoting is needed.
pub fn neg_laplacian_solve(rhs: &[f64], h: f64) -> Vec<f64> {
    let n = rhs.len();
    let h2 = h * h;
    // Scale by h² so the system reads tridiag(-1, 2, -1) x = h² rhs.
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = 2.0;
    d[0] = rhs[0] * h2 / denom;
    if n > 1 {
        c[0] = -1.0 / denom;
    }
    for i in 1..n {
        denom = 2.0 + c[i - 1];
        if i + 1 < n {
            c[i] = -1.0 / denom;
        }
        d[i] = (rhs[i] * h2 + d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
