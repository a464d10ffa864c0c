//! Initial data R^in(x, y) and its projection onto the Hermite modes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::HermiteField;
use crate::grid::Grid1D;
use crate::hermite::{HermiteError, PhiTable, Quadrature};
use crate::observables::trace;

/// Ratio |R_N| / max |R_k| above which the truncation is reported.
pub const TRUNCATION_WARNING: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("quadrature order {got} is below the required 2(N+1) = {need}")]
    QuadratureTooSmall { got: usize, need: usize },
    #[error("cannot normalize to unit trace: trace is {0:e}")]
    ZeroTrace(f64),
    #[error("sigma_x must be positive, got {0}")]
    BadWidth(f64),
    #[error(transparent)]
    Hermite(#[from] HermiteError),
}

pub type StateFn = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub enum StateKind {
    /// amplitude · exp(−((x−x0)²/σx² + y²)/2) · exp(−i p0 y)
    Gaussian {
        x0: f64,
        sigma_x: f64,
        p0: f64,
        amplitude: Option<f64>,
    },
    Custom(StateFn),
}

impl fmt::Debug for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateKind::Gaussian {
                x0,
                sigma_x,
                p0,
                amplitude,
            } => f
                .debug_struct("Gaussian")
                .field("x0", x0)
                .field("sigma_x", sigma_x)
                .field("p0", p0)
                .field("amplitude", amplitude)
                .finish(),
            StateKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Raw,
    UnitTrace,
}

#[derive(Debug, Clone)]
pub struct InitialState {
    pub kind: StateKind,
    pub normalization: Normalization,
}

impl InitialState {
    pub fn gaussian(x0: f64, sigma_x: f64, p0: f64) -> Self {
        Self {
            kind: StateKind::Gaussian {
                x0,
                sigma_x,
                p0,
                amplitude: None,
            },
            normalization: Normalization::Raw,
        }
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// R^in(x, y).
    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        match &self.kind {
            StateKind::Gaussian {
                x0,
                sigma_x,
                p0,
                amplitude,
            } => {
                let a = amplitude.unwrap_or(default_amplitude(*sigma_x));
                let r = ((x - x0) / sigma_x).powi(2) + y * y;
                Complex64::from_polar(a * (-0.5 * r).exp(), -p0 * y)
            }
            StateKind::Custom(f) => f(x, y),
        }
    }
}

/// 1/(√(2π) σx): unit trace for the Gaussian state.
pub fn default_amplitude(sigma_x: f64) -> f64 {
    1.0 / ((2.0 * PI).sqrt() * sigma_x)
}

/// R_{k,j} = Σ_q w_q e^{y_q²} R^in(x_j, y_q) Φ_k(y_q).
pub fn project(state: &InitialState, grid: &Grid1D, n: usize, quad: &Quadrature) -> Result<HermiteField, StateError> {
    let need = 2 * (n + 1);
    if quad.order() < need {
        return Err(StateError::QuadratureTooSmall {
            got: quad.order(),
            need,
        });
    }
    let table = PhiTable::new(n, &quad.nodes)?;
    let nx = grid.nx();
    let nq = quad.order();

    // Cell-major scratch so each cell projects independently.
    let mut cell_major = vec![Complex64::new(0.0, 0.0); (n + 1) * nx];
    match &state.kind {
        StateKind::Gaussian { sigma_x, .. } if sigma_x.is_nan() || *sigma_x <= 0.0 => {
            return Err(StateError::BadWidth(*sigma_x));
        }
        StateKind::Gaussian {
            x0,
            sigma_x,
            p0,
            amplitude,
        } => {
            // Separable: project the y factor once, scale per cell.
            let coeff: Vec<Complex64> = (0..=n)
                .map(|k| {
                    (0..nq)
                        .map(|q| {
                            let y = quad.nodes[q];
                            Complex64::from_polar(quad.scaled_weights[q] * (-0.5 * y * y).exp(), -p0 * y)
                                * table.get(k, q)
                        })
                        .sum()
                })
                .collect();
            let a = amplitude.unwrap_or(default_amplitude(*sigma_x));
            cell_major.par_chunks_mut(n + 1).enumerate().for_each(|(j, cell)| {
                let g = a * (-0.5 * ((grid.center(j) - x0) / sigma_x).powi(2)).exp();
                for (c, v) in cell.iter_mut().zip(&coeff) {
                    *c = v * g;
                }
            });
        }
        StateKind::Custom(f) => {
            cell_major.par_chunks_mut(n + 1).enumerate().for_each(|(j, cell)| {
                let x = grid.center(j);
                let vals: Vec<Complex64> = (0..nq).map(|q| f(x, quad.nodes[q]) * quad.scaled_weights[q]).collect();
                for (k, c) in cell.iter_mut().enumerate() {
                    *c = vals.iter().zip(table.row(k)).map(|(v, p)| v * p).sum();
                }
            });
        }
    }

    let mut field = HermiteField::zeros(n, nx);
    for j in 0..nx {
        for k in 0..=n {
            field.set(k, j, cell_major[j * (n + 1) + k]);
        }
    }

    let peak = field.as_slice().iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let last = field.mode(n).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if peak > 0.0 && last / peak > TRUNCATION_WARNING {
        log::warn!(
            "initial state is not resolved by N = {n}: |R_N| / max|R_k| = {:.2e}",
            last / peak
        );
    }

    if state.normalization == Normalization::UnitTrace {
        let t = trace(&field, grid);
        if t.abs() <= 1e-14 {
            return Err(StateError::ZeroTrace(t));
        }
        field.scale(1.0 / t);
    }
    Ok(field)
}
