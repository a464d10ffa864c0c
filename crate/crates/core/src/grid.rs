//! Uniform finite-volume grid and the centered operators D_Δx, D*_Δx.
//!
//! With zero ghost values (or periodic wrap) the pair satisfies the discrete
//! summation-by-parts identity ⟨D* u, v⟩ = ⟨u, D v⟩ exactly, which is what
//! makes the assembled generator skew-Hermitian.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 3 cells, got {0}")]
    TooFewCells(usize),
    #[error("grid interval [{a}, {b}] is empty or not finite")]
    BadInterval { a: f64, b: f64 },
    #[error("shape mismatch: {0} vs {1}")]
    ShapeMismatch(usize, usize),
}

/// Closure used for the neighbours of the first and last cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Values outside [a, b] are zero.
    #[default]
    ZeroGhost,
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    nx: usize,
    dx: f64,
    boundary: Boundary,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, nx: usize) -> Result<Self, GridError> {
        Self::with_boundary(a, b, nx, Boundary::ZeroGhost)
    }

    pub fn with_boundary(a: f64, b: f64, nx: usize, boundary: Boundary) -> Result<Self, GridError> {
        if nx < 3 {
            return Err(GridError::TooFewCells(nx));
        }
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(GridError::BadInterval { a, b });
        }
        Ok(Self {
            a,
            b,
            nx,
            dx: (b - a) / nx as f64,
            boundary,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Midpoint of cell `j` (0-based): a + (j + 1/2) Δx.
    #[inline]
    pub fn center(&self, j: usize) -> f64 {
        self.a + (j as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.center(j)).collect()
    }

    #[inline]
    fn neighbours(&self, row: &[Complex64], j: usize) -> (Complex64, Complex64) {
        let n = self.nx;
        let zero = Complex64::new(0.0, 0.0);
        match self.boundary {
            Boundary::ZeroGhost => {
                let left = if j > 0 { row[j - 1] } else { zero };
                let right = if j + 1 < n { row[j + 1] } else { zero };
                (left, right)
            }
            Boundary::Periodic => (row[(j + n - 1) % n], row[(j + 1) % n]),
        }
    }

    /// out_j += scale · D_j(row), D_j u = (u_{j+1} − u_{j−1})/(2Δx) − E_j u_j.
    pub fn add_d(&self, row: &[Complex64], force: &[f64], scale: Complex64, out: &mut [Complex64]) {
        self.add_centered(row, force, 1.0, scale, out);
    }

    /// out_j += scale · D*_j(row), D*_j u = −(u_{j+1} − u_{j−1})/(2Δx) − E_j u_j.
    pub fn add_d_star(&self, row: &[Complex64], force: &[f64], scale: Complex64, out: &mut [Complex64]) {
        self.add_centered(row, force, -1.0, scale, out);
    }

    #[inline]
    fn add_centered(&self, row: &[Complex64], force: &[f64], sign: f64, scale: Complex64, out: &mut [Complex64]) {
        debug_assert_eq!(row.len(), self.nx);
        debug_assert_eq!(force.len(), self.nx);
        debug_assert_eq!(out.len(), self.nx);
        let c = sign / (2.0 * self.dx);
        let n = self.nx;
        // Interior without branches; edges through `neighbours`.
        for j in 1..n - 1 {
            let v = (row[j + 1] - row[j - 1]) * c - row[j] * force[j];
            out[j] += scale * v;
        }
        for j in [0, n - 1] {
            let (l, r) = self.neighbours(row, j);
            let v = (r - l) * c - row[j] * force[j];
            out[j] += scale * v;
        }
    }

    pub fn apply_d(&self, row: &[Complex64], force: &[f64]) -> Result<Vec<Complex64>, GridError> {
        self.check(row, force)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.nx];
        self.add_d(row, force, Complex64::new(1.0, 0.0), &mut out);
        Ok(out)
    }

    pub fn apply_d_star(&self, row: &[Complex64], force: &[f64]) -> Result<Vec<Complex64>, GridError> {
        self.check(row, force)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.nx];
        self.add_d_star(row, force, Complex64::new(1.0, 0.0), &mut out);
        Ok(out)
    }

    fn check(&self, row: &[Complex64], force: &[f64]) -> Result<(), GridError> {
        if row.len() != self.nx {
            return Err(GridError::ShapeMismatch(row.len(), self.nx));
        }
        if force.len() != self.nx {
            return Err(GridError::ShapeMismatch(force.len(), self.nx));
        }
        Ok(())
    }

    /// Δx Σ u_i conj(v_i), summed in index order.
    pub fn inner_product(&self, u: &[Complex64], v: &[Complex64]) -> Result<Complex64, GridError> {
        if u.len() != v.len() {
            return Err(GridError::ShapeMismatch(u.len(), v.len()));
        }
        Ok(dot(u, v) * self.dx)
    }
}

/// Σ u_i conj(v_i) in index order (no Δx).
pub fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter()
        .zip(v)
        .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b.conj())
}
