//! Exact harmonic-oscillator solution, the L² error norm and the
//! (Δt, Δx) convergence harness.
//!
//! Under V = x²/2 the Wigner function rotates rigidly in phase space:
//! W(t, x, ξ) = W_0(x cos t − ξ sin t, x sin t + ξ cos t). For the isotropic
//! Gaussian W_0 centered at (x0, ξ0) the rotated function is again an
//! isotropic Gaussian, centered at
//!
//! ```text
//! x_c = x0 cos t + ξ0 sin t,   ξ_c = −x0 sin t + ξ0 cos t
//! ```
//!
//! and its partial inverse Fourier transform in ξ is
//! R(t, x, y) = (2π)^{-1/2} e^{−(x−x_c)²/2} e^{−y²/2} e^{i ξ_c y}.

use rayon::prelude::*;
use thiserror::Error;

use crate::field::HermiteField;
use crate::grid::Grid1D;
use crate::hermite::Quadrature;
use crate::potential::Potential;
use crate::scenario::Scenario;
use crate::simulation::{RunError, Simulation};
use crate::states::{project, InitialState, Normalization, StateError, StateKind};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("no exact solution: {0}")]
    Unsupported(String),
    #[error("history mismatch: {0}")]
    Mismatch(String),
    #[error("refinement list is empty")]
    EmptyRefinement,
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// Phase-space center (x_c, ξ_c) at time t of a packet starting at (x0, ξ0).
pub fn harmonic_center(t: f64, x0: f64, xi0: f64) -> (f64, f64) {
    let (s, c) = t.sin_cos();
    (x0 * c + xi0 * s, -x0 * s + xi0 * c)
}

/// Exact R(t | x, y) for the unit-width Gaussian with e^{−i p0 y} phase.
pub fn harmonic_exact_state(t: f64, x0: f64, p0: f64) -> InitialState {
    let (xc, xic) = harmonic_center(t, x0, -p0);
    InitialState::gaussian(xc, 1.0, -xic)
}

/// Projection of the exact solution at time t.
pub fn harmonic_exact_field(
    t: f64,
    grid: &Grid1D,
    n: usize,
    quad: &Quadrature,
    x0: f64,
    p0: f64,
) -> Result<HermiteField, OracleError> {
    Ok(project(&harmonic_exact_state(t, x0, p0), grid, n, quad)?)
}

/// (x0, p0) when the scenario has the exact harmonic solution.
pub fn harmonic_parameters(scenario: &Scenario) -> Result<(f64, f64), OracleError> {
    if !matches!(scenario.potential, Potential::Harmonic) {
        return Err(OracleError::Unsupported(format!(
            "potential is {}, the oracle needs the harmonic one",
            scenario.potential.name()
        )));
    }
    match scenario.initial.kind {
        StateKind::Gaussian {
            x0,
            sigma_x,
            p0,
            amplitude,
        } if sigma_x == 1.0 && amplitude.is_none() && scenario.initial.normalization == Normalization::Raw => {
            Ok((x0, p0))
        }
        _ => Err(OracleError::Unsupported(
            "initial state must be the unit-width Gaussian with default amplitude".into(),
        )),
    }
}

/// Running max over n of sqrt(Δx Σ_{k,j} |R^n − R(t^n)|²).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorAccumulator {
    pub max: f64,
    pub samples: usize,
}

impl ErrorAccumulator {
    pub fn push(&mut self, numeric: &HermiteField, exact: &HermiteField, grid: &Grid1D) -> Result<f64, OracleError> {
        let e = numeric
            .distance(exact, grid)
            .ok_or_else(|| OracleError::Mismatch("field shapes differ".into()))?;
        self.max = self.max.max(e);
        self.samples += 1;
        Ok(e)
    }
}

/// max_n sqrt(Δx Σ_{k,j} |numeric_n − exact_n|²).
pub fn error_norm(numeric: &[HermiteField], exact: &[HermiteField], grid: &Grid1D) -> Result<f64, OracleError> {
    if numeric.len() != exact.len() {
        return Err(OracleError::Mismatch(format!(
            "{} numeric samples vs {} exact",
            numeric.len(),
            exact.len()
        )));
    }
    let mut acc = ErrorAccumulator::default();
    for (a, b) in numeric.iter().zip(exact) {
        acc.push(a, b, grid)?;
    }
    Ok(acc.max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub dx: f64,
    pub error: f64,
    /// log2(previous error / this error); `None` on the first row.
    pub order: Option<f64>,
}

/// Error of one harmonic run against the exact solution, sampled every step.
pub fn harmonic_run_error(scenario: &Scenario) -> Result<f64, OracleError> {
    let (x0, p0) = harmonic_parameters(scenario)?;
    let mut s = scenario.clone();
    s.output.snapshot_times.clear();
    s.output.interval = s.t_final.max(s.stepper.dt);
    let sim = Simulation::new(s)?;
    let mut acc = ErrorAccumulator::default();
    let mut oracle_failure = None;
    let out = sim.run(false, |view| {
        if oracle_failure.is_some() {
            return;
        }
        let exact = harmonic_exact_field(view.t, &sim.grid, sim.scenario.n, &sim.quadrature, x0, p0)
            .and_then(|ex| acc.push(view.field, &ex, &sim.grid));
        if let Err(e) = exact {
            oracle_failure = Some(e);
        }
    })?;
    if let Some(e) = oracle_failure {
        return Err(e);
    }
    if let Some(e) = out.failure {
        return Err(OracleError::Run(RunError::Solver(e)));
    }
    Ok(acc.max)
}

/// One run per step size h with Δt = Δx = h (Nx = round((b − a)/h)).
/// Runs are independent and execute in parallel.
pub fn convergence_study(scenario: &Scenario, refinements: &[f64]) -> Result<Vec<ConvergenceRow>, OracleError> {
    if refinements.is_empty() {
        return Err(OracleError::EmptyRefinement);
    }
    harmonic_parameters(scenario)?;
    let results: Vec<Result<(f64, f64, f64), OracleError>> = refinements
        .par_iter()
        .map(|&h| {
            let mut s = scenario.clone();
            let len = s.grid.b - s.grid.a;
            s.grid.nx = ((len / h).round() as usize).max(3);
            s.stepper.dt = h;
            let dx = len / s.grid.nx as f64;
            Ok((h, dx, harmonic_run_error(&s)?))
        })
        .collect();
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(results.len());
    for r in results {
        let (dt, dx, error) = r?;
        let order = rows.last().map(|p| (p.error / error).log2());
        rows.push(ConvergenceRow { dt, dx, error, order });
    }
    Ok(rows)
}

/// Writes rows as CSV with columns dt, dx, error, order.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("dt,dx,error,order\n");
    for r in rows {
        let order = r.order.map(|o| format!("{o:.6}")).unwrap_or_default();
        s.push_str(&format!("{},{},{:.12e},{}\n", r.dt, r.dx, r.error, order));
    }
    s
}
