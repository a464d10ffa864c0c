//! Discrete generator of the Hermite system and Crank–Nicolson stepping.
//!
//! For modes k = 0..=N the semi-discrete system reads
//!
//! ```text
//! ∂_t R_k = −i[√(k/2) D R_{k−1} + √((k+1)/2) D* R_{k+1}] − i Σ_l 𝓔ʰ_{k,l} R_l
//! ```
//!
//! with R_{−1} = R_{N+1} = 0. The generator is skew-Hermitian, so the
//! Crank–Nicolson map is a Cayley isometry.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::CouplingOperator;
use crate::field::HermiteField;
use crate::grid::Grid1D;
use crate::krylov::{gmres, GmresConfig};
use crate::potential::{discrete_force, Potential};

/// The truncated Krylov polynomial is not an exact isometry and its norm
/// error has a consistent sign from step to step, so the solve aims one
/// decade below `krylov_tol`. A step is rejected only above `krylov_tol`.
const KRYLOV_TARGET_FACTOR: f64 = 0.1;
/// Relative residuals below this are at round-off level.
const KRYLOV_FLOOR: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(
        "Krylov solve did not converge: relative residual {residual:.3e} after {iterations} iterations \
         (time step too large or tolerance too tight)"
    )]
    KrylovNoConvergence { iterations: usize, residual: f64 },
    #[error("invalid stepper configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    pub dt: f64,
    #[serde(default = "default_tol")]
    pub krylov_tol: f64,
    #[serde(default = "default_restart")]
    pub krylov_restart: usize,
    #[serde(default = "default_max_iter")]
    pub krylov_max_iter: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_restart() -> usize {
    40
}

fn default_max_iter() -> usize {
    500
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            krylov_tol: default_tol(),
            krylov_restart: default_restart(),
            krylov_max_iter: default_max_iter(),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SolverError::InvalidConfig("dt must be positive".into()));
        }
        if !(self.krylov_tol > 0.0 && self.krylov_tol < 1.0) {
            return Err(SolverError::InvalidConfig("krylov_tol must lie in (0, 1)".into()));
        }
        if self.krylov_restart == 0 || self.krylov_max_iter == 0 {
            return Err(SolverError::InvalidConfig(
                "krylov_restart and krylov_max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Everything needed to apply the discrete generator for a fixed potential.
#[derive(Debug, Clone)]
pub struct Generator {
    grid: Grid1D,
    force: Vec<f64>,
    coupling: CouplingOperator,
    n: usize,
}

impl Generator {
    pub fn new(grid: Grid1D, force: Vec<f64>, coupling: CouplingOperator) -> Result<Self, SolverError> {
        if force.len() != grid.nx() {
            return Err(SolverError::Shape(format!(
                "force has {} entries for {} cells",
                force.len(),
                grid.nx()
            )));
        }
        let n = coupling.n();
        Ok(Self {
            grid,
            force,
            coupling,
            n,
        })
    }

    /// Uses the centered-difference force of `potential` on `grid`.
    pub fn from_potential(
        potential: &Potential,
        grid: Grid1D,
        coupling: CouplingOperator,
    ) -> Result<Self, SolverError> {
        let force = discrete_force(potential, &grid);
        Self::new(grid, force, coupling)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn force(&self) -> &[f64] {
        &self.force
    }

    pub fn coupling(&self) -> &CouplingOperator {
        &self.coupling
    }

    fn check(&self, field: &HermiteField) -> Result<(), SolverError> {
        if field.n() != self.n || field.nx() != self.grid.nx() {
            return Err(SolverError::Shape(format!(
                "field is (N={}, Nx={}), generator is (N={}, Nx={})",
                field.n(),
                field.nx(),
                self.n,
                self.grid.nx()
            )));
        }
        Ok(())
    }

    /// out += scale · M u on mode-major storage.
    pub fn apply_flat(&self, u: &[Complex64], out: &mut [Complex64], scale: Complex64) {
        let nx = self.grid.nx();
        let n = self.n;
        let s = scale * Complex64::new(0.0, -1.0);
        out.par_chunks_mut(nx).enumerate().for_each(|(k, out_k)| {
            if k > 0 {
                let c = (k as f64 / 2.0).sqrt();
                self.grid.add_d(&u[(k - 1) * nx..k * nx], &self.force, s * c, out_k);
            }
            if k < n {
                let c = ((k + 1) as f64 / 2.0).sqrt();
                self.grid
                    .add_d_star(&u[(k + 1) * nx..(k + 2) * nx], &self.force, s * c, out_k);
            }
        });
        self.coupling.apply_flat(u, out, s);
    }

    pub fn apply(&self, field: &HermiteField) -> Result<HermiteField, SolverError> {
        self.check(field)?;
        let mut out = HermiteField::zeros(field.n(), field.nx());
        self.apply_flat(field.as_slice(), out.as_mut_slice(), Complex64::new(1.0, 0.0));
        Ok(out)
    }

    /// One Crank–Nicolson step (I − Δt/2 M) U = (I + Δt/2 M) U_in, solved by
    /// GMRES from the initial guess U_in. Returns the new field and the
    /// number of Krylov iterations.
    pub fn cn_step(&self, field: &HermiteField, config: &StepperConfig) -> Result<(HermiteField, usize), SolverError> {
        self.check(field)?;
        config.validate()?;
        let half = Complex64::new(0.5 * config.dt, 0.0);
        let mut rhs = field.as_slice().to_vec();
        self.apply_flat(field.as_slice(), &mut rhs, half);

        let mut x = field.as_slice().to_vec();
        let lhs = |v: &[Complex64], out: &mut [Complex64]| {
            out.copy_from_slice(v);
            self.apply_flat(v, out, -half);
        };
        let outcome = gmres(
            lhs,
            &rhs,
            &mut x,
            &GmresConfig {
                tol: (KRYLOV_TARGET_FACTOR * config.krylov_tol).max(KRYLOV_FLOOR),
                restart: config.krylov_restart,
                max_iter: config.krylov_max_iter,
            },
        );
        let residual = outcome.relative_residual;
        if residual.is_nan() || residual > config.krylov_tol {
            return Err(SolverError::KrylovNoConvergence {
                iterations: outcome.iterations,
                residual: outcome.relative_residual,
            });
        }
        let out = HermiteField::from_data(field.n(), field.nx(), x).expect("shape preserved");
        Ok((out, outcome.iterations))
    }
}

/// Stateless form of [`Generator::apply`].
pub fn apply_generator(
    field: &HermiteField,
    force: &[f64],
    coupling: &CouplingOperator,
    grid: &Grid1D,
) -> Result<HermiteField, SolverError> {
    Generator::new(grid.clone(), force.to_vec(), coupling.clone())?.apply(field)
}
