//! The two one-parameter state families the experiments sweep over, plus
//! their partially-distilled companion targets.

use crate::error::{CoherenceError, Result};
use crate::state::PureState;

fn check_range(alpha: f64, lo: f64, hi: f64, what: &str) -> Result<()> {
    if !alpha.is_finite() || alpha < lo || alpha > hi {
        return Err(CoherenceError::InvalidArgument(format!(
            "{what} requires alpha in [{lo}, {hi}], got {alpha}"
        )));
    }
    Ok(())
}

/// Qutrit family: sqrt((1-a)/2) on modes 0,1 and sqrt(a) on mode 2, for
/// a in [0,1].
pub fn psi3(alpha: f64) -> Result<PureState> {
    check_range(alpha, 0.0, 1.0, "psi3")?;
    let s = ((1.0 - alpha) / 2.0).sqrt();
    PureState::from_reals(&[s, s, alpha.sqrt()])
}

/// Ququart family: sqrt(a) on modes 0,1 and sqrt(1/2-a) on modes 2,3, for
/// a in [0,1/2].
pub fn psi4(alpha: f64) -> Result<PureState> {
    check_range(alpha, 0.0, 0.5, "psi4")?;
    let u = alpha.sqrt();
    let v = (0.5 - alpha).sqrt();
    PureState::from_reals(&[u, u, v, v])
}

/// Two-mode companion target (sqrt(a), sqrt(1-a)); the exact image of the
/// qutrit family under the 3->2 cascade for a > 1/2.
pub fn phi_3to2(alpha: f64) -> Result<PureState> {
    check_range(alpha, 0.0, 1.0, "phi_3to2")?;
    PureState::from_reals(&[alpha.sqrt(), (1.0 - alpha).sqrt()])
}

/// Three-mode companion target sqrt(2a)|1> + sqrt(1/2-a)(|2>+|3>), written
/// in the ququart's four-mode basis (mode 0 empty).
pub fn phi_4to3(alpha: f64) -> Result<PureState> {
    check_range(alpha, 0.0, 0.5, "phi_4to3")?;
    let v = (0.5 - alpha).sqrt();
    PureState::from_reals(&[0.0, (2.0 * alpha).sqrt(), v, v])
}

/// Selector for sweep-style APIs that iterate a family over its domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Psi3,
    Psi4,
}

impl Family {
    pub fn domain(self) -> (f64, f64) {
        match self {
            Family::Psi3 => (0.0, 1.0),
            Family::Psi4 => (0.0, 0.5),
        }
    }

    pub fn state(self, alpha: f64) -> Result<PureState> {
        match self {
            Family::Psi3 => psi3(alpha),
            Family::Psi4 => psi4(alpha),
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Family::Psi3 => 3,
            Family::Psi4 => 4,
        }
    }
}

impl std::str::FromStr for Family {
    type Err = CoherenceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psi3" => Ok(Family::Psi3),
            "psi4" => Ok(Family::Psi4),
            other => Err(CoherenceError::InvalidArgument(format!(
                "unknown family '{other}' (expected psi3 or psi4)"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Psi3 => "psi3",
            Family::Psi4 => "psi4",
        })
    }
}
