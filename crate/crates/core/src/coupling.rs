//! Hermite matrix elements of the nonlocal potential remainder.
//!
//! The potential difference splits as
//!
//! ```text
//! [V(x + ħy/2) − V(x − ħy/2)]/ħ = V'(x) y + 𝓔ʰ(x, y)
//! ```
//!
//! The linear part is carried by D_Δx / D*_Δx; this module handles 𝓔ʰ,
//! either through its full Galerkin matrix 𝓔ʰ_{k,l}(x_j) (real, symmetric,
//! zero when k + l is even) or through the O(ħ²) banded y³ source.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::HermiteField;
use crate::grid::Grid1D;
use crate::hermite::{self, PhiTable, Quadrature};
use crate::potential::Potential;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("hbar must be positive for a {0} coupling, got {1}")]
    NonPositiveHbar(&'static str, f64),
    #[error("quadrature order {got} is below the required 2(N+1) = {need}")]
    QuadratureTooSmall { got: usize, need: usize },
    #[error("y³ band self-check failed at ({k}, {l}): closed form {closed}, quadrature {quad}")]
    SelfCheck { k: usize, l: usize, closed: f64, quad: f64 },
    #[error(transparent)]
    Hermite(#[from] hermite::HermiteError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    Full,
    Truncated,
    /// Semi-classical limit: the remainder is dropped altogether.
    None,
}

impl CouplingMode {
    pub fn name(self) -> &'static str {
        match self {
            CouplingMode::Full => "full",
            CouplingMode::Truncated => "truncated",
            CouplingMode::None => "none",
        }
    }
}

/// 𝓔ʰ(x, y) = [V(x + ħy/2) − V(x − ħy/2)]/ħ − V'(x) y.
pub fn remainder(potential: &Potential, hbar: f64, x: f64, y: f64) -> f64 {
    let h = 0.5 * hbar * y;
    (potential.value(x + h) - potential.value(x - h)) / hbar - potential.first_derivative(x) * y
}

/// Closed-form ∫ y³ Φ_k Φ_l dy. Nonzero only for |k − l| ∈ {1, 3}.
pub fn y3_element(k: usize, l: usize) -> f64 {
    let (lo, hi) = if k < l { (k, l) } else { (l, k) };
    let m = lo as f64;
    match hi - lo {
        1 => 1.5 * (m + 1.0) * ((m + 1.0) / 2.0).sqrt(),
        3 => ((m + 1.0) * (m + 2.0) * (m + 3.0) / 8.0).sqrt(),
        _ => 0.0,
    }
}

const SELF_CHECK_MODES: usize = 32;

/// Compares [`y3_element`] against Gauss–Hermite quadrature once per process.
pub fn verify_y3_elements() -> Result<(), CouplingError> {
    static RESULT: OnceLock<Result<(), CouplingError>> = OnceLock::new();
    RESULT
        .get_or_init(|| {
            let n = SELF_CHECK_MODES;
            let quad = hermite::default_quadrature(n + 2)?;
            let table = PhiTable::new(n, &quad.nodes)?;
            for k in 0..=n {
                for l in 0..=n {
                    let q: f64 = (0..quad.order())
                        .map(|i| {
                            let y = quad.nodes[i];
                            quad.scaled_weights[i] * y * y * y * table.get(k, i) * table.get(l, i)
                        })
                        .sum();
                    let closed = y3_element(k, l);
                    if (q - closed).abs() > 1e-9 * (1.0 + closed.abs()) {
                        return Err(CouplingError::SelfCheck { k, l, closed, quad: q });
                    }
                }
            }
            Ok(())
        })
        .clone()
}

/// Per-cell symmetric matrices, storing only the upper triangle with k + l odd.
#[derive(Debug, Clone)]
pub struct FullCoupling {
    n: usize,
    nx: usize,
    hbar: f64,
    pairs: Vec<(u32, u32)>,
    /// `values[j * pairs.len() + p]` = M_j[pairs[p]]
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TruncatedCoupling {
    n: usize,
    hbar: f64,
    /// V'''(x_j)
    v3: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum CouplingOperator {
    Full(FullCoupling),
    Truncated(TruncatedCoupling),
    None { n: usize, nx: usize },
}

fn odd_pairs(n: usize) -> Vec<(u32, u32)> {
    let mut pairs = Vec::with_capacity((n + 1) * (n + 1) / 4 + 1);
    for k in 0..=n {
        for l in ((k + 1)..=n).step_by(2) {
            pairs.push((k as u32, l as u32));
        }
    }
    pairs
}

fn check_quadrature(quad: &Quadrature, n: usize) -> Result<(), CouplingError> {
    let need = 2 * (n + 1);
    if quad.order() < need {
        return Err(CouplingError::QuadratureTooSmall {
            got: quad.order(),
            need,
        });
    }
    Ok(())
}

/// Dense (N+1)² matrix ∫ 𝓔ʰ(x, y) Φ_k Φ_l dy at one point, with no parity
/// assumption. Used to verify the packed operator.
pub fn dense_matrix_at(
    potential: &Potential,
    hbar: f64,
    x: f64,
    n: usize,
    quad: &Quadrature,
) -> Result<Vec<f64>, CouplingError> {
    check_quadrature(quad, n)?;
    if hbar <= 0.0 {
        return Err(CouplingError::NonPositiveHbar("full", hbar));
    }
    let table = PhiTable::new(n, &quad.nodes)?;
    let g: Vec<f64> = (0..quad.order())
        .map(|q| quad.scaled_weights[q] * remainder(potential, hbar, x, quad.nodes[q]))
        .collect();
    let mut m = vec![0.0; (n + 1) * (n + 1)];
    for k in 0..=n {
        for l in 0..=n {
            m[k * (n + 1) + l] = (0..quad.order())
                .map(|q| g[q] * table.get(k, q) * table.get(l, q))
                .sum();
        }
    }
    Ok(m)
}

impl CouplingOperator {
    /// Full quadrature matrices 𝓔ʰ_{k,l}(x_j), using the analytic V'.
    pub fn assemble_full(
        potential: &Potential,
        hbar: f64,
        grid: &Grid1D,
        n: usize,
        quad: &Quadrature,
    ) -> Result<Self, CouplingError> {
        if hbar <= 0.0 || !hbar.is_finite() {
            return Err(CouplingError::NonPositiveHbar("full", hbar));
        }
        check_quadrature(quad, n)?;
        let table = PhiTable::new(n, &quad.nodes)?;
        let pairs = odd_pairs(n);
        let np = pairs.len();
        let nq = quad.order();
        let mut values = vec![0.0; grid.nx() * np];
        values.par_chunks_mut(np.max(1)).enumerate().for_each(|(j, cell)| {
            if np == 0 {
                return;
            }
            let x = grid.center(j);
            let g: Vec<f64> = (0..nq)
                .map(|q| quad.scaled_weights[q] * remainder(potential, hbar, x, quad.nodes[q]))
                .collect();
            let mut weighted = vec![0.0; nq];
            let mut p = 0;
            for k in 0..=n {
                let row_k = table.row(k);
                for q in 0..nq {
                    weighted[q] = g[q] * row_k[q];
                }
                for l in ((k + 1)..=n).step_by(2) {
                    let row_l = table.row(l);
                    cell[p] = weighted.iter().zip(row_l).map(|(a, b)| a * b).sum();
                    p += 1;
                }
            }
        });
        Ok(CouplingOperator::Full(FullCoupling {
            n,
            nx: grid.nx(),
            hbar,
            pairs,
            values,
        }))
    }

    /// ħ² V'''(x_j)/24 times the y³ band. Exact for potentials of degree ≤ 4.
    pub fn assemble_truncated(
        potential: &Potential,
        hbar: f64,
        grid: &Grid1D,
        n: usize,
    ) -> Result<Self, CouplingError> {
        if hbar <= 0.0 || !hbar.is_finite() {
            return Err(CouplingError::NonPositiveHbar("truncated", hbar));
        }
        verify_y3_elements()?;
        let h = grid.dx();
        let v3 = grid
            .centers()
            .into_iter()
            .map(|x| potential.third_derivative_or_fd(x, h))
            .collect();
        Ok(CouplingOperator::Truncated(TruncatedCoupling { n, hbar, v3 }))
    }

    pub fn none(n: usize, nx: usize) -> Self {
        CouplingOperator::None { n, nx }
    }

    /// Builds the operator for a coupling mode; ħ = 0 always yields `None`.
    pub fn assemble(
        mode: CouplingMode,
        potential: &Potential,
        hbar: f64,
        grid: &Grid1D,
        n: usize,
        quad: &Quadrature,
    ) -> Result<Self, CouplingError> {
        if hbar == 0.0 {
            return Ok(Self::none(n, grid.nx()));
        }
        match mode {
            CouplingMode::Full => Self::assemble_full(potential, hbar, grid, n, quad),
            CouplingMode::Truncated => Self::assemble_truncated(potential, hbar, grid, n),
            CouplingMode::None => Ok(Self::none(n, grid.nx())),
        }
    }

    pub fn mode(&self) -> CouplingMode {
        match self {
            CouplingOperator::Full(_) => CouplingMode::Full,
            CouplingOperator::Truncated(_) => CouplingMode::Truncated,
            CouplingOperator::None { .. } => CouplingMode::None,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            CouplingOperator::Full(f) => f.n,
            CouplingOperator::Truncated(t) => t.n,
            CouplingOperator::None { n, .. } => *n,
        }
    }

    pub fn hbar(&self) -> f64 {
        match self {
            CouplingOperator::Full(f) => f.hbar,
            CouplingOperator::Truncated(t) => t.hbar,
            CouplingOperator::None { .. } => 0.0,
        }
    }

    /// Matrix entry M_j[k][l] of the real coupling.
    pub fn entry(&self, j: usize, k: usize, l: usize) -> f64 {
        match self {
            CouplingOperator::Full(f) => {
                if (k + l).is_multiple_of(2) {
                    return 0.0;
                }
                let (lo, hi) = if k < l { (k, l) } else { (l, k) };
                // Pairs for row `lo` start after all rows above it.
                let offset: usize = (0..lo).map(|r| (f.n - r).div_ceil(2)).sum();
                let p = offset + (hi - lo - 1) / 2;
                debug_assert_eq!(f.pairs[p], (lo as u32, hi as u32));
                f.values[j * f.pairs.len() + p]
            }
            CouplingOperator::Truncated(t) => t.hbar * t.hbar * t.v3[j] / 24.0 * y3_element(k, l),
            CouplingOperator::None { .. } => 0.0,
        }
    }

    /// out += scale · (M field), M acting per cell on the mode index.
    pub fn apply_into(&self, field: &HermiteField, out: &mut HermiteField, scale: Complex64) {
        debug_assert!(field.same_shape(out));
        self.apply_flat(field.as_slice(), out.as_mut_slice(), scale);
    }

    /// [`Self::apply_into`] on raw mode-major storage of length (N+1)·Nx.
    pub fn apply_flat(&self, u: &[Complex64], out: &mut [Complex64], scale: Complex64) {
        debug_assert_eq!(u.len(), out.len());
        let nx = u.len() / (self.n() + 1);
        match self {
            CouplingOperator::None { .. } => {}
            CouplingOperator::Truncated(t) => t.apply_flat(u, nx, out, scale),
            CouplingOperator::Full(f) => f.apply_flat(u, out, scale),
        }
    }

    /// The real matrix action M field (no −i factor).
    pub fn apply(&self, field: &HermiteField) -> HermiteField {
        let mut out = HermiteField::zeros(field.n(), field.nx());
        self.apply_into(field, &mut out, Complex64::new(1.0, 0.0));
        out
    }
}

impl TruncatedCoupling {
    fn apply_flat(&self, u: &[Complex64], nx: usize, out: &mut [Complex64], scale: Complex64) {
        let n = self.n;
        let pref = scale * (self.hbar * self.hbar / 24.0);
        out.par_chunks_mut(nx).enumerate().for_each(|(k, out_k)| {
            let mut band: [(usize, f64); 4] = [(0, 0.0); 4];
            let mut nb = 0;
            for l in [k.wrapping_sub(3), k.wrapping_sub(1), k + 1, k + 3] {
                if l <= n {
                    band[nb] = (l, y3_element(k, l));
                    nb += 1;
                }
            }
            for j in 0..nx {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(l, c) in &band[..nb] {
                    acc += u[l * nx + j] * c;
                }
                out_k[j] += pref * (acc * self.v3[j]);
            }
        });
    }
}

impl FullCoupling {
    fn apply_flat(&self, u: &[Complex64], out: &mut [Complex64], scale: Complex64) {
        let m = self.n + 1;
        let nx = self.nx;
        let np = self.pairs.len();
        let mut cell_major = vec![Complex64::new(0.0, 0.0); m * nx];
        cell_major.par_chunks_mut(m).enumerate().for_each(|(j, res)| {
            let vals = &self.values[j * np..(j + 1) * np];
            for (&(k, l), &v) in self.pairs.iter().zip(vals) {
                let (k, l) = (k as usize, l as usize);
                res[k] += u[l * nx + j] * v;
                res[l] += u[k * nx + j] * v;
            }
        });
        out.par_chunks_mut(nx).enumerate().for_each(|(k, out_k)| {
            for (j, o) in out_k.iter_mut().enumerate() {
                *o += scale * cell_major[j * m + k];
            }
        });
    }
}

/// Residual diagnostics (D₂ʰ, D₄ʰ):
///
/// ```text
/// D₂ = ‖(ΔV/ħ − V'(x) y) R‖,  D₄ = ‖(ΔV/ħ − V'(x) y − ħ² V'''(x) y³/24) R‖
/// ```
///
/// R(x_j, y_q) is synthesized at the quadrature nodes and the L² norm is
/// taken with weights w_q e^{y_q²} and cell measure Δx.
pub fn residual_norms(
    field: &HermiteField,
    potential: &Potential,
    hbar: f64,
    grid: &Grid1D,
    quad: &Quadrature,
    table: &PhiTable,
) -> (f64, f64) {
    if hbar == 0.0 {
        return (0.0, 0.0);
    }
    let n_modes = field.n_modes();
    let nq = quad.order();
    debug_assert!(table.n_modes >= n_modes && table.n_nodes == nq);
    let h = grid.dx();
    let partial: Vec<(f64, f64)> = (0..grid.nx())
        .into_par_iter()
        .map(|j| {
            let x = grid.center(j);
            let v3 = potential.third_derivative_or_fd(x, h);
            let mut s2 = 0.0;
            let mut s4 = 0.0;
            for q in 0..nq {
                let mut r = Complex64::new(0.0, 0.0);
                for k in 0..n_modes {
                    r += field.get(k, j) * table.get(k, q);
                }
                let y = quad.nodes[q];
                let e2 = remainder(potential, hbar, x, y);
                let e4 = e2 - hbar * hbar / 24.0 * v3 * y * y * y;
                let w = quad.scaled_weights[q] * r.norm_sqr();
                s2 += w * e2 * e2;
                s4 += w * e4 * e4;
            }
            (s2, s4)
        })
        .collect();
    let (s2, s4) = partial.iter().fold((0.0, 0.0), |(a, b), &(c, d)| (a + c, b + d));
    ((h * s2).sqrt(), (h * s4).sqrt())
}
