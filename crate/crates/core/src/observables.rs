//! Trace, norm, macroscopic densities, energies and the Wigner transform.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::HermiteField;
use crate::grid::Grid1D;
use crate::hermite::{phi_values_at_zero, HermiteError, PhiTable};
use crate::potential::Potential;

/// Imaginary parts above this (relative) level are reported before discard.
pub const IMAG_TOLERANCE: f64 = 1e-10;

/// Warnings past this count drop to debug level so long runs stay readable.
const IMAG_WARN_LIMIT: usize = 5;
static IMAG_WARNINGS: AtomicUsize = AtomicUsize::new(0);

fn check_imag(what: &str, imag: f64, scale: f64) {
    if imag <= IMAG_TOLERANCE * scale.max(1.0) {
        return;
    }
    let seen = IMAG_WARNINGS.fetch_add(1, Ordering::Relaxed);
    if seen < IMAG_WARN_LIMIT {
        log::warn!("{what}: imaginary residual {imag:.3e} exceeds {IMAG_TOLERANCE:.0e}");
        if seen + 1 == IMAG_WARN_LIMIT {
            log::warn!("further imaginary-residual warnings are logged at debug level");
        }
    } else {
        log::debug!("{what}: imaginary residual {imag:.3e} exceeds {IMAG_TOLERANCE:.0e}");
    }
}

/// Δx Σ_j Σ_k R_{k,j} Φ_k(0) before the imaginary part is dropped.
pub fn trace_complex(field: &HermiteField, grid: &Grid1D) -> Complex64 {
    let (phi0, _) = phi_values_at_zero(field.n());
    let mut acc = Complex64::new(0.0, 0.0);
    // Odd modes vanish at the origin.
    for k in (0..field.n_modes()).step_by(2) {
        let s: Complex64 = field.mode(k).iter().sum();
        acc += s * phi0[k];
    }
    acc * grid.dx()
}

/// ∫ R(x, 0) dx.
pub fn trace(field: &HermiteField, grid: &Grid1D) -> f64 {
    let t = trace_complex(field, grid);
    check_imag("trace", t.im.abs(), t.re.abs());
    t.re
}

pub fn l2_norm(field: &HermiteField, grid: &Grid1D) -> f64 {
    field.l2_norm(grid)
}

/// ρ = R(x,0), ρu = i ∂_y R(x,0), ρe = −½ ∂_y² R(x,0) per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroFields {
    pub rho: Vec<f64>,
    pub rho_u: Vec<f64>,
    pub rho_e: Vec<f64>,
    /// Largest discarded imaginary part over the three arrays.
    pub imag_residual: f64,
}

pub fn macro_densities(field: &HermiteField, grid: &Grid1D) -> MacroFields {
    let nx = grid.nx();
    let (phi0, dphi0) = phi_values_at_zero(field.n());
    let mut rho = vec![Complex64::new(0.0, 0.0); nx];
    let mut rho_u = vec![Complex64::new(0.0, 0.0); nx];
    let mut rho_e = vec![Complex64::new(0.0, 0.0); nx];
    let i = Complex64::new(0.0, 1.0);
    for k in 0..field.n_modes() {
        let row = field.mode(k);
        let e = 0.5 * (2 * k + 1) as f64 * phi0[k];
        for j in 0..nx {
            rho[j] += row[j] * phi0[k];
            rho_u[j] += i * row[j] * dphi0[k];
            rho_e[j] += row[j] * e;
        }
    }
    let mut imag = 0.0f64;
    let mut scale = 0.0f64;
    for z in rho.iter().chain(&rho_u).chain(&rho_e) {
        imag = imag.max(z.im.abs());
        scale = scale.max(z.re.abs());
    }
    check_imag("macroscopic densities", imag, scale);
    let re = |v: Vec<Complex64>| v.into_iter().map(|z| z.re).collect();
    MacroFields {
        rho: re(rho),
        rho_u: re(rho_u),
        rho_e: re(rho_e),
        imag_residual: imag,
    }
}

/// 𝒦 = −½ ∫ ∂_y² R(x, 0) dx = ½ Σ_k (2k+1) Φ_k(0) ∫ R_k dx.
pub fn kinetic_energy(field: &HermiteField, grid: &Grid1D) -> f64 {
    let (phi0, _) = phi_values_at_zero(field.n());
    let mut acc = Complex64::new(0.0, 0.0);
    for k in (0..field.n_modes()).step_by(2) {
        let s: Complex64 = field.mode(k).iter().sum();
        acc += s * (0.5 * (2 * k + 1) as f64 * phi0[k]);
    }
    let e = acc * grid.dx();
    check_imag("kinetic energy", e.im.abs(), e.re.abs());
    e.re
}

/// ∫ V(x) ρ(x) dx with cell-centered V.
pub fn potential_energy(field: &HermiteField, grid: &Grid1D, potential: &Potential) -> f64 {
    let m = macro_densities(field, grid);
    grid.dx()
        * m.rho
            .iter()
            .enumerate()
            .map(|(j, r)| potential.value(grid.center(j)) * r)
            .sum::<f64>()
}

/// Uniform momentum grid including both end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for XiGrid {
    fn default() -> Self {
        Self {
            min: -8.0,
            max: 8.0,
            count: 256,
        }
    }
}

impl XiGrid {
    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.max > self.min && self.count >= 2
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.count).map(|i| self.min + i as f64 * h).collect()
    }
}

/// W(x_j, ξ_i) stored with x rows and ξ columns.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerField {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub values: Vec<f64>,
    pub imag_residual: f64,
}

impl WignerField {
    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.xi.len() + i]
    }

    fn riemann(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let dx = if self.x.len() > 1 { self.x[1] - self.x[0] } else { 0.0 };
        let dxi = if self.xi.len() > 1 {
            self.xi[1] - self.xi[0]
        } else {
            0.0
        };
        let w: Vec<f64> = self.xi.iter().map(|&xi| weight(xi)).collect();
        let s: f64 = self
            .values
            .chunks(self.xi.len())
            .map(|row| row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        s * dx * dxi
    }

    /// Δx Δξ Σ W.
    pub fn mass(&self) -> f64 {
        self.riemann(|_| 1.0)
    }

    /// Δx Δξ Σ W ξ².
    pub fn second_moment(&self) -> f64 {
        self.riemann(|xi| xi * xi)
    }
}

/// W(x, ξ) = (1/√(2π)) Σ_k (−i)^k R_k(x) Φ_k(ξ).
pub fn wigner(field: &HermiteField, grid: &Grid1D, xi_grid: &XiGrid) -> Result<WignerField, HermiteError> {
    let xi = xi_grid.nodes();
    let table = PhiTable::new(field.n(), &xi)?;
    let nxi = xi.len();
    let nx = grid.nx();
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let phase = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    let mut values = vec![0.0; nx * nxi];
    let imag: Vec<f64> = values
        .par_chunks_mut(nxi)
        .enumerate()
        .map(|(j, row)| {
            let mut acc = vec![Complex64::new(0.0, 0.0); nxi];
            for k in 0..field.n_modes() {
                let c = phase[k % 4] * field.get(k, j) * norm;
                for (a, p) in acc.iter_mut().zip(table.row(k)) {
                    *a += c * p;
                }
            }
            let mut worst = 0.0f64;
            for (r, a) in row.iter_mut().zip(&acc) {
                *r = a.re;
                worst = worst.max(a.im.abs());
            }
            worst
        })
        .collect();
    let imag_residual = imag.into_iter().fold(0.0, f64::max);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    check_imag("Wigner transform", imag_residual, scale);
    Ok(WignerField {
        x: grid.centers(),
        xi,
        values,
        imag_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::PI_M_QUARTER;
    use std::f64::consts::PI;

    fn mode0_gaussian(grid: &Grid1D, n: usize, x0: f64) -> HermiteField {
        // (1/√(2π)) e^{−(x−x0)²/2} e^{−y²/2} has R_0 = π^{1/4}/√(2π) e^{−(x−x0)²/2}.
        let mut f = HermiteField::zeros(n, grid.nx());
        for j in 0..grid.nx() {
            let x = grid.center(j);
            let v = PI.powf(0.25) / (2.0 * PI).sqrt() * (-(x - x0).powi(2) / 2.0).exp();
            f.set(0, j, Complex64::new(v, 0.0));
        }
        f
    }

    #[test]
    fn trivial_traces() {
        let grid = Grid1D::new(-8.0, 8.0, 160).unwrap();
        assert_eq!(trace(&HermiteField::zeros(4, 160), &grid), 0.0);
        assert_eq!(kinetic_energy(&HermiteField::zeros(4, 160), &grid), 0.0);
        let mut odd = HermiteField::zeros(4, 160);
        for j in 0..160 {
            odd.set(1, j, Complex64::new(0.0, 1.0));
            odd.set(3, j, Complex64::new(0.0, -2.0));
        }
        assert_eq!(trace(&odd, &grid), 0.0);
    }

    #[test]
    fn gaussian_moments() {
        let grid = Grid1D::new(-8.0, 8.0, 320).unwrap();
        let f = mode0_gaussian(&grid, 6, 0.5);
        assert!((trace(&f, &grid) - 1.0).abs() < 1e-10);
        assert!((kinetic_energy(&f, &grid) - 0.5).abs() < 1e-10);
        let m = macro_densities(&f, &grid);
        assert!(m.rho_u.iter().all(|&v| v == 0.0));
        assert_eq!(m.imag_residual, 0.0);
        let integral: f64 = m.rho_e.iter().sum::<f64>() * grid.dx();
        assert!((integral - 0.5).abs() < 1e-10);
        assert!((m.rho[0] - f.get(0, 0).re * PI_M_QUARTER).abs() < 1e-15);
        // ∫ x²/2 ρ dx = (1 + x0²)/2 for unit variance.
        let ep = potential_energy(&f, &grid, &Potential::Harmonic);
        assert!((ep - (1.0 + 0.25) / 2.0).abs() < 1e-3);
    }

    #[test]
    fn wigner_of_mode0_gaussian() {
        let grid = Grid1D::new(-3.0, 13.0, 200).unwrap();
        let f = mode0_gaussian(&grid, 3, 5.0);
        let w = wigner(&f, &grid, &XiGrid::default()).unwrap();
        assert_eq!(w.imag_residual, 0.0);
        for j in (0..200).step_by(17) {
            let x = grid.center(j);
            for i in (0..256).step_by(13) {
                let xi = w.xi[i];
                let exact = (-((x - 5.0).powi(2) + xi * xi) / 2.0).exp() / (2.0 * PI);
                assert!((w.get(j, i) - exact).abs() < 1e-10);
            }
        }
        assert!((w.mass() - trace(&f, &grid)).abs() < 1e-6);
        let k = kinetic_energy(&f, &grid);
        assert!((w.second_moment() - 2.0 * k).abs() < 1e-5);
    }

    #[test]
    fn wigner_imaginary_residual_for_parity_fields() {
        let grid = Grid1D::new(-2.0, 2.0, 8).unwrap();
        let mut f = HermiteField::zeros(5, 8);
        for k in 0..=5 {
            for j in 0..8 {
                let v = 1.0 / (1.0 + (k + j) as f64);
                f.set(
                    k,
                    j,
                    if k % 2 == 0 {
                        Complex64::new(v, 0.0)
                    } else {
                        Complex64::new(0.0, v)
                    },
                );
            }
        }
        let w = wigner(
            &f,
            &grid,
            &XiGrid {
                min: -4.0,
                max: 4.0,
                count: 33,
            },
        )
        .unwrap();
        assert!(w.imag_residual <= 1e-10);
        f.set(1, 3, Complex64::new(1.0, 0.0));
        let w = wigner(
            &f,
            &grid,
            &XiGrid {
                min: -4.0,
                max: 4.0,
                count: 33,
            },
        )
        .unwrap();
        assert!(w.imag_residual > 1e-3);
    }
}
