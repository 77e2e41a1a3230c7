//! Square banded matrices with an unpivoted LU solve.
//!
//! The systems assembled by the semi-implicit scheme are either symmetric
//! positive definite or column diagonally dominant, for which elimination
//! without pivoting is stable.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Banded {
    n: usize,
    lower: usize,
    upper: usize,
    // Row-major band storage; row i keeps columns i-lower ..= i+upper.
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self { n, lower, upper, data: vec![0.0; n * (lower + upper + 1)] }
    }

    pub fn identity(n: usize, lower: usize, upper: usize) -> Self {
        let mut m = Self::zeros(n, lower, upper);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.lower < i || j > i + self.upper || i >= self.n || j >= self.n {
            return None;
        }
        Some(i * (self.lower + self.upper + 1) + (j + self.lower - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j).expect("entry outside band");
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j).expect("entry outside band");
        self.data[k] += v;
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.lower)..(i + self.upper + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.cols(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Dense product `self * other`, widened to the combined band.
    pub fn matmul(&self, other: &Banded) -> Banded {
        assert_eq!(self.n, other.n);
        let mut out = Banded::zeros(self.n, self.lower + other.lower, self.upper + other.upper);
        for i in 0..self.n {
            for k in self.cols(i) {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in other.cols(k) {
                    out.add(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    /// Returns `I - c * self`, keeping the band.
    pub fn identity_minus(&self, c: f64) -> Banded {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= -c;
        }
        for i in 0..self.n {
            out.add(i, i, 1.0);
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Banded {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= c;
        }
        out
    }

    pub fn plus(&self, other: &Banded) -> Banded {
        let lower = self.lower.max(other.lower);
        let upper = self.upper.max(other.upper);
        let mut out = Banded::zeros(self.n, lower, upper);
        for i in 0..self.n {
            for j in self.cols(i) {
                out.add(i, j, self.get(i, j));
            }
            for j in other.cols(i) {
                out.add(i, j, other.get(i, j));
            }
        }
        out
    }

    /// Solves `self * x = rhs` by banded Gaussian elimination.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::Dimension { expected: self.n, actual: rhs.len() });
        }
        let mut a = self.clone();
        let mut x = rhs.to_vec();
        let n = self.n;
        for k in 0..n {
            let pivot = a.get(k, k);
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular { row: k });
            }
            let row_end = (k + self.lower + 1).min(n);
            let col_end = (k + self.upper + 1).min(n);
            for i in k + 1..row_end {
                let f = a.get(i, k) / pivot;
                if f == 0.0 {
                    continue;
                }
                a.set(i, k, 0.0);
                for j in k + 1..col_end {
                    a.add(i, j, -f * a.get(k, j));
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let col_end = (k + self.upper + 1).min(n);
            let mut s = x[k];
            for j in k + 1..col_end {
                s -= a.get(k, j) * x[j];
            }
            x[k] = s / a.get(k, k);
        }
        Ok(x)
    }
}

/// Dirichlet second-difference matrix `D²` (negative definite).
pub fn second_difference_matrix(n: usize, h: f64) -> Banded {
    let mut m = Banded::zeros(n, 1, 1);
    let inv = 1.0 / (h * h);
    for i in 0..n {
        m.set(i, i, -2.0 * inv);
        if i > 0 {
            m.set(i, i - 1, inv);
        }
        if i + 1 < n {
            m.set(i, i + 1, inv);
        }
    }
    m
}
