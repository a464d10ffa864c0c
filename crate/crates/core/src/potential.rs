//! External potentials V(x) with analytic derivatives.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::grid::Grid1D;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("derivative order {0} is not available for this potential")]
    MissingOrder(u8),
    #[error("unknown potential preset `{0}`")]
    UnknownPreset(String),
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied potential. V and V' are mandatory, V''' is optional.
#[derive(Clone)]
pub struct UserPotential {
    pub value: ScalarFn,
    pub first: ScalarFn,
    pub third: Option<ScalarFn>,
}

impl fmt::Debug for UserPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserPotential")
            .field("third", &self.third.is_some())
            .finish_non_exhaustive()
    }
}

const MORSE_DEPTH: f64 = 20.0;
const MORSE_RANGE: f64 = 0.16;

/// Default anharmonicity of the quartic preset.
pub const DEFAULT_QUARTIC_BETA: f64 = 0.5;

#[derive(Debug, Clone)]
pub enum Potential {
    /// x²/2
    Harmonic,
    /// x²/2 + β x⁴/4
    Quartic {
        beta: f64,
    },
    /// exp(−x²/2)
    GaussianBarrier,
    /// 20 (1 − exp(−0.16 x))²
    Morse,
    User(UserPotential),
}

impl Potential {
    /// Look up a preset by its configuration name.
    pub fn from_preset(name: &str, beta: Option<f64>) -> Result<Self, PotentialError> {
        match name {
            "harmonic" => Ok(Potential::Harmonic),
            "quartic" => Ok(Potential::Quartic {
                beta: beta.unwrap_or(DEFAULT_QUARTIC_BETA),
            }),
            "gaussian_barrier" => Ok(Potential::GaussianBarrier),
            "morse" => Ok(Potential::Morse),
            other => Err(PotentialError::UnknownPreset(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Potential::Harmonic => "harmonic",
            Potential::Quartic { .. } => "quartic",
            Potential::GaussianBarrier => "gaussian_barrier",
            Potential::Morse => "morse",
            Potential::User(_) => "user",
        }
    }

    /// Degree of the potential when it is a polynomial, `None` otherwise.
    ///
    /// For degree ≤ 4 the y³ term is the whole odd Taylor series of the
    /// potential difference, so the truncated coupling is exact.
    pub fn max_exact_taylor_degree(&self) -> Option<u32> {
        match self {
            Potential::Harmonic => Some(2),
            Potential::Quartic { .. } => Some(4),
            _ => None,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Harmonic => 0.5 * x * x,
            Potential::Quartic { beta } => 0.5 * x * x + 0.25 * beta * x.powi(4),
            Potential::GaussianBarrier => (-0.5 * x * x).exp(),
            Potential::Morse => {
                let s = 1.0 - (-MORSE_RANGE * x).exp();
                MORSE_DEPTH * s * s
            }
            Potential::User(u) => (u.value)(x),
        }
    }

    pub fn first_derivative(&self, x: f64) -> f64 {
        match self {
            Potential::Harmonic => x,
            Potential::Quartic { beta } => x + beta * x.powi(3),
            Potential::GaussianBarrier => -x * (-0.5 * x * x).exp(),
            Potential::Morse => {
                let u = (-MORSE_RANGE * x).exp();
                2.0 * MORSE_DEPTH * MORSE_RANGE * (u - u * u)
            }
            Potential::User(u) => (u.first)(x),
        }
    }

    /// V'''(x) when analytically known.
    pub fn third_derivative(&self, x: f64) -> Option<f64> {
        Some(match self {
            Potential::Harmonic => 0.0,
            Potential::Quartic { beta } => 6.0 * beta * x,
            Potential::GaussianBarrier => (3.0 * x - x.powi(3)) * (-0.5 * x * x).exp(),
            Potential::Morse => {
                let u = (-MORSE_RANGE * x).exp();
                2.0 * MORSE_DEPTH * MORSE_RANGE.powi(3) * (u - 4.0 * u * u)
            }
            Potential::User(u) => return u.third.as_ref().map(|f| f(x)),
        })
    }

    /// V''' for the truncated source: analytic when available, otherwise a
    /// centered second difference of V' with step `h`.
    pub fn third_derivative_or_fd(&self, x: f64, h: f64) -> f64 {
        self.third_derivative(x).unwrap_or_else(|| {
            (self.first_derivative(x + h) - 2.0 * self.first_derivative(x) + self.first_derivative(x - h)) / (h * h)
        })
    }

    /// V, V' or V''' at `x`.
    pub fn eval(&self, x: f64, order: u8) -> Result<f64, PotentialError> {
        match order {
            0 => Ok(self.value(x)),
            1 => Ok(self.first_derivative(x)),
            3 => self.third_derivative(x).ok_or(PotentialError::MissingOrder(3)),
            d => Err(PotentialError::MissingOrder(d)),
        }
    }
}

/// Centered-difference force field E_j = −(V(x_{j+1}) − V(x_{j−1}))/(2Δx).
///
/// The two outermost stencils evaluate V one cell beyond the interval.
pub fn discrete_force(potential: &Potential, grid: &Grid1D) -> Vec<f64> {
    let dx = grid.dx();
    (0..grid.nx())
        .map(|j| {
            let x = grid.center(j);
            -(potential.value(x + dx) - potential.value(x - dx)) / (2.0 * dx)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn presets() -> Vec<Potential> {
        vec![
            Potential::Harmonic,
            Potential::Quartic { beta: 0.5 },
            Potential::GaussianBarrier,
            Potential::Morse,
        ]
    }

    #[test]
    fn preset_values() {
        assert_eq!(Potential::Harmonic.eval(2.0, 0).unwrap(), 2.0);
        assert_eq!(Potential::Quartic { beta: 0.5 }.eval(1.0, 3).unwrap(), 3.0);
        assert_eq!(Potential::Morse.eval(0.0, 0).unwrap(), 0.0);
        assert_eq!(Potential::GaussianBarrier.eval(0.0, 0).unwrap(), 1.0);
        assert!(matches!(
            Potential::Harmonic.eval(0.0, 2),
            Err(PotentialError::MissingOrder(2))
        ));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-4;
        for p in presets() {
            for &x in &[-3.1, -0.4, 0.0, 0.7, 2.5, 6.0] {
                let fd1 = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
                assert!((fd1 - p.first_derivative(x)).abs() < 1e-6, "{} V' at {x}", p.name());
                let fd3 =
                    (p.first_derivative(x + h) - 2.0 * p.first_derivative(x) + p.first_derivative(x - h)) / (h * h);
                let v3 = p.third_derivative(x).unwrap();
                assert!((fd3 - v3).abs() < 1e-5 * (1.0 + v3.abs()), "{} V''' at {x}", p.name());
            }
        }
    }

    #[test]
    fn user_potential_missing_third_derivative() {
        let user = Potential::User(UserPotential {
            value: Arc::new(|x: f64| x.powi(3)),
            first: Arc::new(|x: f64| 3.0 * x * x),
            third: None,
        });
        assert_eq!(user.eval(2.0, 0).unwrap(), 8.0);
        assert_eq!(user.eval(2.0, 3), Err(PotentialError::MissingOrder(3)));
        assert!((user.third_derivative_or_fd(2.0, 1e-3) - 6.0).abs() < 1e-6);
    }

    #[test]
    fn preset_lookup() {
        assert!(matches!(
            Potential::from_preset("quartic", None).unwrap(),
            Potential::Quartic { beta } if beta == 0.5
        ));
        assert!(Potential::from_preset("coulomb", None).is_err());
    }

    #[test]
    fn harmonic_force_is_exact() {
        let grid = Grid1D::new(-8.0, 8.0, 40).unwrap();
        let e = discrete_force(&Potential::Harmonic, &grid);
        for (j, ej) in e.iter().enumerate() {
            assert!((ej + grid.center(j)).abs() < 1e-12);
        }
        let flat = Potential::User(UserPotential {
            value: Arc::new(|_| 3.0),
            first: Arc::new(|_| 0.0),
            third: None,
        });
        assert!(discrete_force(&flat, &grid).iter().all(|&e| e == 0.0));
    }

    #[test]
    fn even_potentials_give_odd_force() {
        let grid = Grid1D::new(-5.0, 5.0, 51).unwrap();
        for p in [Potential::Harmonic, Potential::GaussianBarrier] {
            let e = discrete_force(&p, &grid);
            let n = e.len();
            for j in 0..n {
                assert!((e[j] + e[n - 1 - j]).abs() < 1e-13);
            }
            assert!(e[25].abs() < 1e-13);
        }
    }

    #[test]
    fn force_converges_second_order() {
        for p in presets() {
            let mut errs = Vec::new();
            for nx in [40usize, 80, 160] {
                let grid = Grid1D::new(-3.0, 5.0, nx).unwrap();
                let e = discrete_force(&p, &grid);
                let err = e
                    .iter()
                    .enumerate()
                    .map(|(j, ej)| (ej + p.first_derivative(grid.center(j))).abs())
                    .fold(0.0, f64::max);
                errs.push(err);
            }
            if errs[0] < 1e-12 {
                continue; // exact for quadratics
            }
            for w in errs.windows(2) {
                let order = (w[0] / w[1]).log2();
                assert!((order - 2.0).abs() < 0.15, "{}: order {order}", p.name());
            }
        }
    }
}
