//! Run parameters, the preset catalogue and the TOML configuration format.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::coupling::CouplingMode;
use crate::dynamics::StepperConfig;
use crate::grid::{Boundary, Grid1D};
use crate::observables::XiGrid;
use crate::potential::Potential;
use crate::states::{InitialState, Normalization, StateKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown preset `{0}` (try the `presets` command)")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub nx: usize,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid1D, ConfigError> {
        Grid1D::with_boundary(self.a, self.b, self.nx, self.boundary).map_err(|e| invalid("grid", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPlan {
    /// Time between observable records; rounded to a whole number of steps.
    pub interval: f64,
    pub snapshot_times: Vec<f64>,
    /// Also write a Wigner CSV next to each field snapshot.
    pub wigner: bool,
    pub xi: XiGrid,
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    /// Highest Hermite mode.
    pub n: usize,
    pub hbar: f64,
    pub t_final: f64,
    pub potential: Potential,
    pub initial: InitialState,
    pub coupling: CouplingMode,
    pub stepper: StepperConfig,
    pub output: OutputPlan,
    /// Gauss–Hermite order; 2(N+1) when unset.
    pub quadrature_order: Option<usize>,
}

impl Scenario {
    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order.unwrap_or(2 * (self.n + 1))
    }

    /// Checks every field and applies the ħ = 0 ⇒ no coupling rule.
    pub fn validated(mut self) -> Result<Self, ConfigError> {
        self.grid.build()?;
        if !(self.hbar >= 0.0 && self.hbar.is_finite()) {
            return Err(invalid("hbar", "hbar must be finite and non-negative"));
        }
        if self.hbar == 0.0 {
            self.coupling = CouplingMode::None;
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(invalid("t_final", "t_final must be finite and non-negative"));
        }
        self.stepper.validate().map_err(|e| match e {
            crate::dynamics::SolverError::InvalidConfig(m) => invalid("stepper", m),
            other => invalid("stepper", other.to_string()),
        })?;
        if self.quadrature_order() < 2 * (self.n + 1) {
            return Err(invalid(
                "quadrature_order",
                format!("must be at least 2(N+1) = {}", 2 * (self.n + 1)),
            ));
        }
        if let StateKind::Gaussian { sigma_x, .. } = self.initial.kind {
            if !(sigma_x > 0.0 && sigma_x.is_finite()) {
                return Err(invalid("initial.sigma_x", "sigma_x must be positive"));
            }
        }
        if let Potential::Quartic { beta } = self.potential {
            if !beta.is_finite() {
                return Err(invalid("potential.beta", "beta must be finite"));
            }
        }
        let out = &mut self.output;
        if !(out.interval > 0.0 && out.interval.is_finite()) {
            return Err(invalid("output.interval", "interval must be positive"));
        }
        if out.snapshot_times.iter().any(|&t| !(0.0..=self.t_final).contains(&t)) {
            return Err(invalid(
                "output.snapshots",
                format!("snapshot times must lie in [0, {}]", self.t_final),
            ));
        }
        out.snapshot_times.sort_by(f64::total_cmp);
        out.snapshot_times.dedup();
        if !out.xi.is_valid() {
            return Err(invalid("output.xi", "xi grid needs min < max and at least 2 nodes"));
        }
        Ok(self)
    }
}

pub const PRESET_NAMES: [&str; 4] = ["harmonic", "quartic", "tunneling", "morse"];

fn gaussian(x0: f64, sigma_x: f64, p0: f64) -> InitialState {
    InitialState::gaussian(x0, sigma_x, p0)
}

/// The four reference scenarios; `desk` selects the reduced-resolution variant.
pub fn preset(name: &str, desk: bool) -> Result<Scenario, ConfigError> {
    let base_stepper = StepperConfig::new;
    let s = match name {
        "harmonic" => Scenario {
            name: name.into(),
            grid: GridSpec {
                a: -8.0,
                b: 8.0,
                nx: if desk { 200 } else { 400 },
                boundary: Boundary::ZeroGhost,
            },
            n: 20,
            hbar: 1.0,
            t_final: 2.0 * PI,
            potential: Potential::Harmonic,
            initial: gaussian(5.0, 1.0, 0.0),
            coupling: CouplingMode::Truncated,
            stepper: base_stepper(if desk { 0.08 } else { 0.04 }),
            output: OutputPlan {
                interval: if desk { 0.08 } else { 0.04 },
                snapshot_times: vec![0.0, 0.5 * PI, PI, 1.5 * PI, 2.0 * PI],
                wigner: true,
                xi: XiGrid::default(),
                dir: None,
            },
            quadrature_order: None,
        },
        "quartic" => Scenario {
            name: name.into(),
            grid: GridSpec {
                a: -4.0,
                b: 4.0,
                nx: if desk { 200 } else { 400 },
                boundary: Boundary::ZeroGhost,
            },
            n: if desk { 128 } else { 400 },
            hbar: 0.5,
            t_final: if desk { 50.0 } else { 70.0 },
            potential: Potential::Quartic { beta: 0.5 },
            initial: gaussian(0.0, 0.6, 0.0),
            coupling: CouplingMode::Truncated,
            stepper: base_stepper(if desk { 0.02 } else { 0.01 }),
            output: OutputPlan {
                interval: 0.1,
                snapshot_times: if desk {
                    vec![0.0, 10.0, 20.0, 30.0, 50.0]
                } else {
                    vec![0.0, 10.0, 20.0, 30.0, 50.0, 70.0]
                },
                wigner: true,
                xi: XiGrid::default(),
                dir: None,
            },
            quadrature_order: None,
        },
        "tunneling" => Scenario {
            name: name.into(),
            grid: GridSpec {
                a: -12.0,
                b: 16.0,
                nx: if desk { 250 } else { 1000 },
                boundary: Boundary::ZeroGhost,
            },
            n: if desk { 128 } else { 400 },
            hbar: 0.1,
            t_final: 3.2,
            potential: Potential::GaussianBarrier,
            // The state carries e^{+4iy}, i.e. p0 = −4 in e^{−i p0 y}.
            initial: gaussian(-5.0, 0.6, -4.0),
            coupling: CouplingMode::Full,
            stepper: base_stepper(0.01),
            output: OutputPlan {
                interval: 0.04,
                snapshot_times: vec![0.0, 0.8, 1.6, 2.4, 2.8, 3.2],
                wigner: true,
                xi: XiGrid {
                    min: -10.0,
                    max: 14.0,
                    count: 384,
                },
                dir: None,
            },
            quadrature_order: None,
        },
        "morse" => Scenario {
            name: name.into(),
            grid: GridSpec {
                a: -4.0,
                b: 16.0,
                nx: if desk { 200 } else { 1000 },
                boundary: Boundary::ZeroGhost,
            },
            n: if desk { 128 } else { 400 },
            hbar: 0.5,
            t_final: 20.0,
            potential: Potential::Morse,
            initial: gaussian(4.0, 0.6, 0.0),
            coupling: CouplingMode::Full,
            stepper: base_stepper(0.01),
            output: OutputPlan {
                interval: 0.1,
                snapshot_times: vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0],
                wigner: true,
                xi: XiGrid::default(),
                dir: None,
            },
            quadrature_order: None,
        },
        other => return Err(ConfigError::UnknownPreset(other.into())),
    };
    let mut s = s;
    if desk {
        s.name.push_str("-desk");
    }
    Ok(s)
}

/// Every preset as (full, desk).
pub fn scenario_presets() -> Vec<(Scenario, Scenario)> {
    PRESET_NAMES
        .iter()
        .map(|n| (preset(n, false).expect("known"), preset(n, true).expect("known")))
        .collect()
}

// Configuration file layout. Every key is optional so that a file can
// override a preset key by key; without a preset all keys are required.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    preset: Option<String>,
    desk: Option<bool>,
    name: Option<String>,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    potential: PotentialSection,
    #[serde(default)]
    initial: InitialSection,
    #[serde(default)]
    stepper: StepperSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    a: Option<f64>,
    b: Option<f64>,
    nx: Option<usize>,
    boundary: Option<Boundary>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    n: Option<usize>,
    hbar: Option<f64>,
    t_final: Option<f64>,
    coupling: Option<CouplingMode>,
    quadrature_order: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialSection {
    kind: Option<String>,
    beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    kind: Option<String>,
    x0: Option<f64>,
    sigma_x: Option<f64>,
    p0: Option<f64>,
    amplitude: Option<f64>,
    normalization: Option<Normalization>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepperSection {
    dt: Option<f64>,
    krylov_tol: Option<f64>,
    krylov_restart: Option<usize>,
    krylov_max_iter: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    interval: Option<f64>,
    snapshots: Option<Vec<f64>>,
    wigner: Option<bool>,
    xi_min: Option<f64>,
    xi_max: Option<f64>,
    xi_count: Option<usize>,
    dir: Option<PathBuf>,
}

fn pick<T>(value: Option<T>, base: Option<T>, field: &'static str) -> Result<T, ConfigError> {
    value
        .or(base)
        .ok_or_else(|| invalid(field, "missing (no preset to inherit from)"))
}

/// Parses configuration text. `preset` on the command line wins over a
/// `preset` key in the file.
pub fn parse_config_str(text: &str, preset_override: Option<&str>, desk: bool) -> Result<Scenario, ConfigError> {
    let cfg: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let desk = desk || cfg.desk.unwrap_or(false);
    let base = match preset_override.or(cfg.preset.as_deref()) {
        Some(p) => Some(preset(p, desk)?),
        None => None,
    };
    let b = base.as_ref();

    let grid = GridSpec {
        a: pick(cfg.grid.a, b.map(|s| s.grid.a), "grid.a")?,
        b: pick(cfg.grid.b, b.map(|s| s.grid.b), "grid.b")?,
        nx: pick(cfg.grid.nx, b.map(|s| s.grid.nx), "grid.nx")?,
        boundary: cfg.grid.boundary.or(b.map(|s| s.grid.boundary)).unwrap_or_default(),
    };
    let n = pick(cfg.model.n, b.map(|s| s.n), "model.n")?;
    let hbar = pick(cfg.model.hbar, b.map(|s| s.hbar), "model.hbar")?;
    let t_final = pick(cfg.model.t_final, b.map(|s| s.t_final), "model.t_final")?;
    let coupling = pick(cfg.model.coupling, b.map(|s| s.coupling), "model.coupling")?;
    let quadrature_order = cfg.model.quadrature_order.or(b.and_then(|s| s.quadrature_order));

    let potential = match cfg.potential.kind.as_deref() {
        Some(kind) => {
            Potential::from_preset(kind, cfg.potential.beta).map_err(|e| invalid("potential.kind", e.to_string()))?
        }
        None => match (b.map(|s| s.potential.clone()), cfg.potential.beta) {
            (Some(Potential::Quartic { .. }), Some(beta)) => Potential::Quartic { beta },
            (Some(_), Some(_)) => return Err(invalid("potential.beta", "only the quartic potential takes beta")),
            (Some(p), None) => p,
            (None, _) => return Err(invalid("potential.kind", "missing (no preset to inherit from)")),
        },
    };

    if let Some(kind) = cfg.initial.kind.as_deref() {
        if kind != "gaussian" {
            return Err(invalid(
                "initial.kind",
                format!("unsupported kind `{kind}` (only `gaussian` is configurable)"),
            ));
        }
    }
    let base_gauss = b.and_then(|s| match s.initial.kind {
        StateKind::Gaussian {
            x0,
            sigma_x,
            p0,
            amplitude,
        } => Some((x0, sigma_x, p0, amplitude)),
        StateKind::Custom(_) => None,
    });
    let initial = InitialState {
        kind: StateKind::Gaussian {
            x0: pick(cfg.initial.x0, base_gauss.map(|g| g.0), "initial.x0")?,
            sigma_x: pick(cfg.initial.sigma_x, base_gauss.map(|g| g.1), "initial.sigma_x")?,
            p0: pick(cfg.initial.p0, base_gauss.map(|g| g.2), "initial.p0")?,
            amplitude: cfg.initial.amplitude.or(base_gauss.and_then(|g| g.3)),
        },
        normalization: cfg
            .initial
            .normalization
            .or(b.map(|s| s.initial.normalization))
            .unwrap_or_default(),
    };

    let dt = pick(cfg.stepper.dt, b.map(|s| s.stepper.dt), "stepper.dt")?;
    let defaults = b.map(|s| s.stepper).unwrap_or(StepperConfig::new(dt));
    let stepper = StepperConfig {
        dt,
        krylov_tol: cfg.stepper.krylov_tol.unwrap_or(defaults.krylov_tol),
        krylov_restart: cfg.stepper.krylov_restart.unwrap_or(defaults.krylov_restart),
        krylov_max_iter: cfg.stepper.krylov_max_iter.unwrap_or(defaults.krylov_max_iter),
    };

    let base_xi = b.map(|s| s.output.xi).unwrap_or_default();
    let output = OutputPlan {
        interval: cfg.output.interval.or(b.map(|s| s.output.interval)).unwrap_or(dt),
        snapshot_times: cfg
            .output
            .snapshots
            .or(b.map(|s| s.output.snapshot_times.clone()))
            .unwrap_or_else(|| vec![0.0, t_final]),
        wigner: cfg.output.wigner.or(b.map(|s| s.output.wigner)).unwrap_or(false),
        xi: XiGrid {
            min: cfg.output.xi_min.unwrap_or(base_xi.min),
            max: cfg.output.xi_max.unwrap_or(base_xi.max),
            count: cfg.output.xi_count.unwrap_or(base_xi.count),
        },
        dir: cfg.output.dir.or(b.and_then(|s| s.output.dir.clone())),
    };

    let name = cfg
        .name
        .or(b.map(|s| s.name.clone()))
        .unwrap_or_else(|| "custom".into());

    Scenario {
        name,
        grid,
        n,
        hbar,
        t_final,
        potential,
        initial,
        coupling,
        stepper,
        output,
        quadrature_order,
    }
    .validated()
}

/// Loads a config file, or a preset when only a name is given.
pub fn parse_config(path: Option<&Path>, preset_name: Option<&str>, desk: bool) -> Result<Scenario, ConfigError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            parse_config_str(&text, preset_name, desk)
        }
        None => match preset_name {
            Some(name) => preset(name, desk)?.validated(),
            None => Err(invalid("preset", "either a preset or a config file is required")),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_reference_parameters() {
        let h = preset("harmonic", false).unwrap();
        assert_eq!((h.grid.a, h.grid.b), (-8.0, 8.0));
        assert_eq!(h.t_final, 2.0 * PI);
        assert!(matches!(h.potential, Potential::Harmonic));
        let t = preset("tunneling", false).unwrap();
        assert_eq!((t.grid.nx, t.n, t.stepper.dt), (1000, 400, 0.01));
        assert_eq!(t.hbar, 0.1);
        assert_eq!(preset("morse", false).unwrap().hbar, 0.5);
        let q = preset("quartic", true).unwrap();
        assert_eq!((q.n, q.grid.nx, q.stepper.dt, q.t_final), (128, 200, 0.02, 50.0));
        for (full, desk) in scenario_presets() {
            full.validated().unwrap();
            let d = desk.validated().unwrap();
            assert!(d.n <= 128);
        }
        assert!(matches!(preset("nope", false), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn negative_dt_is_rejected() {
        let err = parse_config_str("preset = \"harmonic\"\n[stepper]\ndt = -0.01\n", None, false).unwrap_err();
        assert!(err.to_string().contains("dt must be positive"), "{err}");
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = parse_config_str("preset = \"harmonic\"\n[grid]\nnxx = 3\n", None, false).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        assert!(err.to_string().contains("line"), "{err}");
        assert!(parse_config_str("colour = 1\n", None, false).is_err());
    }

    #[test]
    fn quartic_truncated_config() {
        let text = r#"
            preset = "quartic"
            [model]
            coupling = "truncated"
            hbar = 0.5
            [potential]
            beta = 0.25
        "#;
        let s = parse_config_str(text, None, true).unwrap();
        assert_eq!(s.coupling, CouplingMode::Truncated);
        assert!(matches!(s.potential, Potential::Quartic { beta } if beta == 0.25));
        assert_eq!(s.n, 128);
    }

    #[test]
    fn full_config_without_preset() {
        let text = r#"
            [grid]
            a = -2.0
            b = 2.0
            nx = 40
            [model]
            n = 8
            hbar = 0.0
            t_final = 1.0
            coupling = "full"
            [potential]
            kind = "gaussian_barrier"
            [initial]
            x0 = 0.0
            sigma_x = 0.5
            p0 = 1.0
            normalization = "unit_trace"
            [stepper]
            dt = 0.1
            [output]
            interval = 0.2
            snapshots = [1.0, 0.0, 1.0]
        "#;
        let s = parse_config_str(text, None, false).unwrap();
        assert_eq!(s.coupling, CouplingMode::None);
        assert_eq!(s.output.snapshot_times, vec![0.0, 1.0]);
        assert_eq!(s.initial.normalization, Normalization::UnitTrace);

        let missing = text.replace("nx = 40", "");
        let err = parse_config_str(&missing, None, false).unwrap_err();
        assert!(err.to_string().contains("grid.nx"), "{err}");
        let late = text.replace("snapshots = [1.0, 0.0, 1.0]", "snapshots = [2.0]");
        assert!(parse_config_str(&late, None, false).is_err());
    }
}
