//! Time loop: Crank–Nicolson steps from t = 0 to T with observable records
//! and field snapshots.

use thiserror::Error;

use crate::coupling::{residual_norms, CouplingError, CouplingOperator};
use crate::dynamics::{Generator, SolverError, StepperConfig};
use crate::field::HermiteField;
use crate::grid::Grid1D;
use crate::hermite::{gauss_hermite, HermiteError, PhiTable, Quadrature};
use crate::observables::{kinetic_energy, trace};
use crate::potential::Potential;
use crate::scenario::{ConfigError, Scenario};
use crate::states::{project, StateError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Hermite(#[from] HermiteError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// One row of observables.csv.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableRecord {
    pub t: f64,
    pub norm: f64,
    pub trace: f64,
    pub kinetic_energy: f64,
    pub d2: f64,
    pub d4: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: HermiteField,
}

#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub records: Vec<ObservableRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_field: HermiteField,
    pub final_time: f64,
    pub steps: usize,
    /// Set when the loop stopped early; everything above is what was
    /// produced before the failing step.
    pub failure: Option<SolverError>,
}

/// Read-only view handed to observers after every committed step.
pub struct StepView<'a> {
    pub step: usize,
    pub t: f64,
    pub field: &'a HermiteField,
    pub krylov_iterations: usize,
}

/// Prebuilt operators for one scenario.
pub struct Simulation {
    pub scenario: Scenario,
    pub grid: Grid1D,
    pub generator: Generator,
    pub quadrature: Quadrature,
    table: PhiTable,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, RunError> {
        let scenario = scenario.validated()?;
        let grid = scenario.grid.build()?;
        let quadrature = gauss_hermite(scenario.quadrature_order())?;
        let coupling = CouplingOperator::assemble(
            scenario.coupling,
            &scenario.potential,
            scenario.hbar,
            &grid,
            scenario.n,
            &quadrature,
        )?;
        let generator = Generator::from_potential(&scenario.potential, grid.clone(), coupling)?;
        let table = PhiTable::new(scenario.n, &quadrature.nodes)?;
        Ok(Self {
            scenario,
            grid,
            generator,
            quadrature,
            table,
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.scenario.potential
    }

    pub fn initial_field(&self) -> Result<HermiteField, RunError> {
        Ok(project(
            &self.scenario.initial,
            &self.grid,
            self.scenario.n,
            &self.quadrature,
        )?)
    }

    pub fn record(&self, t: f64, field: &HermiteField) -> ObservableRecord {
        let (d2, d4) = residual_norms(
            field,
            &self.scenario.potential,
            self.scenario.hbar,
            &self.grid,
            &self.quadrature,
            &self.table,
        );
        ObservableRecord {
            t,
            norm: field.l2_norm(&self.grid),
            trace: trace(field, &self.grid),
            kinetic_energy: kinetic_energy(field, &self.grid),
            d2,
            d4,
        }
    }

    /// Runs from the projected initial state.
    pub fn run(&self, progress: bool, observer: impl FnMut(&StepView)) -> Result<RunOutputs, RunError> {
        let field = self.initial_field()?;
        Ok(self.run_from(field, progress, observer))
    }

    /// Runs from an explicit initial field.
    pub fn run_from(&self, mut field: HermiteField, progress: bool, mut observer: impl FnMut(&StepView)) -> RunOutputs {
        let s = &self.scenario;
        let dt = s.stepper.dt;
        let t_final = s.t_final;
        let snaps = &s.output.snapshot_times;
        let record_every = ((s.output.interval / dt).round() as usize).max(1);
        // Two times closer than this are treated as equal.
        let eps = 1e-9 * dt;

        let mut records = vec![self.record(0.0, &field)];
        let norm0 = records[0].norm;
        let mut snapshots = Vec::new();
        let mut next_snap = 0;
        while next_snap < snaps.len() && snaps[next_snap] <= eps {
            snapshots.push(Snapshot {
                t: 0.0,
                field: field.clone(),
            });
            next_snap += 1;
        }

        let mut t = 0.0;
        let mut step = 0;
        let mut failure = None;
        observer(&StepView {
            step: 0,
            t,
            field: &field,
            krylov_iterations: 0,
        });
        while t < t_final - eps {
            let stop = snaps.get(next_snap).copied().unwrap_or(t_final).min(t_final);
            let landing = t + dt >= stop - eps;
            let h = if landing { stop - t } else { dt };
            let cfg = StepperConfig { dt: h, ..s.stepper };
            match self.generator.cn_step(&field, &cfg) {
                Ok((next, iters)) => {
                    field = next;
                    step += 1;
                    t = if landing { stop } else { t + dt };
                    observer(&StepView {
                        step,
                        t,
                        field: &field,
                        krylov_iterations: iters,
                    });
                    let at_end = t >= t_final - eps;
                    if step % record_every == 0 || at_end {
                        let r = self.record(t, &field);
                        if progress {
                            eprintln!(
                                "step {step:>7}  t = {t:>10.4}  norm drift = {:+.3e}  trace = {:.8}  krylov = {iters}",
                                (r.norm - norm0) / norm0.max(f64::MIN_POSITIVE),
                                r.trace
                            );
                        }
                        records.push(r);
                    }
                    while next_snap < snaps.len() && snaps[next_snap] <= t + eps {
                        snapshots.push(Snapshot {
                            t,
                            field: field.clone(),
                        });
                        next_snap += 1;
                    }
                }
                Err(e) => {
                    log::error!("step {} at t = {t}: {e}", step + 1);
                    failure = Some(e);
                    break;
                }
            }
        }
        RunOutputs {
            records,
            snapshots,
            final_field: field,
            final_time: t,
            steps: step,
            failure,
        }
    }
}

/// Builds and runs a scenario without an observer.
pub fn run(scenario: Scenario) -> Result<RunOutputs, RunError> {
    Simulation::new(scenario)?.run(false, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::preset;

    fn small_harmonic() -> Scenario {
        let mut s = preset("harmonic", true).unwrap();
        s.grid.nx = 64;
        s.n = 8;
        s.stepper.dt = 0.1;
        s.t_final = 1.0;
        s.output.interval = 0.3;
        s.output.snapshot_times = vec![0.0, 0.25, 1.0];
        s
    }

    #[test]
    fn zero_final_time_records_only_initial_state() {
        let mut s = small_harmonic();
        s.t_final = 0.0;
        s.output.snapshot_times = vec![0.0];
        let out = run(s).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.steps, 0);
        assert_eq!(out.snapshots.len(), 1);
        assert_eq!(out.records[0].t, 0.0);
    }

    #[test]
    fn lands_exactly_on_snapshot_and_final_times() {
        let out = run(small_harmonic()).unwrap();
        let times: Vec<f64> = out.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times, vec![0.0, 0.25, 1.0]);
        assert_eq!(out.final_time, 1.0);
        assert_eq!(out.records.last().unwrap().t, 1.0);
        // 0.1, 0.2, 0.25, 0.35, ..., 0.95, 1.0
        assert_eq!(out.steps, 11);
        let n0 = out.records[0].norm;
        for r in &out.records {
            assert!(((r.norm - n0) / n0).abs() < 1e-9);
        }
    }

    #[test]
    fn observer_sees_every_step() {
        let sim = Simulation::new(small_harmonic()).unwrap();
        let mut seen = Vec::new();
        let out = sim.run(false, |v| seen.push((v.step, v.t))).unwrap();
        assert_eq!(seen.len(), out.steps + 1);
        assert_eq!(seen[0], (0, 0.0));
        assert_eq!(seen.last().unwrap().1, 1.0);
    }

    #[test]
    fn solver_failure_keeps_partial_output() {
        let mut s = small_harmonic();
        s.stepper.krylov_max_iter = 1;
        s.stepper.dt = 0.5;
        let out = run(s).unwrap();
        assert!(matches!(out.failure, Some(SolverError::KrylovNoConvergence { .. })));
        assert_eq!(out.steps, 0);
        assert_eq!(out.records.len(), 1);
    }
}
