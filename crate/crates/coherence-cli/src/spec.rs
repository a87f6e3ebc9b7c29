//! Argument-to-state translation shared by the subcommands.

use clap::{Args, ValueEnum};
use coherence_core::{phi_3to2, phi_4to3, Family, PureState};

use crate::Failure;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Psi3,
    Psi4,
}

impl FamilyArg {
    pub fn family(self) -> Family {
        match self {
            FamilyArg::Psi3 => Family::Psi3,
            FamilyArg::Psi4 => Family::Psi4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FamilyArg::Psi3 => "psi3",
            FamilyArg::Psi4 => "psi4",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureArg {
    #[value(name = "2b")]
    B,
    #[value(name = "2d")]
    D,
    #[value(name = "2e")]
    E,
}

impl FigureArg {
    pub fn label(self) -> &'static str {
        match self {
            FigureArg::B => "2b",
            FigureArg::D => "2d",
            FigureArg::E => "2e",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InjectArg {
    KrausPerturb,
    OracleMismatch,
}

/// Input state selector: a family member (--family + --alpha) or an explicit
/// amplitude list (--amps, normalized on entry).
#[derive(Args)]
pub struct StateSpec {
    /// Parametrized input family.
    #[arg(long, value_enum, requires = "alpha", conflicts_with = "amps")]
    pub family: Option<FamilyArg>,
    /// Family coefficient.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Real amplitudes, comma separated; normalized on entry.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub amps: Option<Vec<f64>>,
}

impl StateSpec {
    pub fn build(&self) -> Result<PureState, Failure> {
        match (self.family, &self.amps) {
            (Some(f), None) => {
                let alpha = self.alpha.ok_or_else(|| Failure::usage("--family requires --alpha"))?;
                Ok(f.family().state(alpha)?)
            }
            (None, Some(a)) => Ok(PureState::from_reals(a)?),
            _ => Err(Failure::usage("state spec: give either --family/--alpha or --amps")),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetFamilyArg {
    Psi3,
    Psi4,
    #[value(name = "phi3to2")]
    Phi3to2,
    #[value(name = "phi4to3")]
    Phi4to3,
}

/// Conversion target selector: a uniform unit (--to-m), a family member
/// (--to-family + --to-alpha), or an explicit amplitude list (--to-amps).
#[derive(Args)]
pub struct TargetSpec {
    /// Maximally coherent target dimension.
    #[arg(long, conflicts_with_all = ["to_amps", "to_family"])]
    pub to_m: Option<usize>,
    /// Parametrized target family.
    #[arg(long, value_enum, requires = "to_alpha", conflicts_with = "to_amps")]
    pub to_family: Option<TargetFamilyArg>,
    /// Target family coefficient.
    #[arg(long)]
    pub to_alpha: Option<f64>,
    /// Real target amplitudes, comma separated; normalized on entry.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub to_amps: Option<Vec<f64>>,
}

impl TargetSpec {
    pub fn build(&self) -> Result<PureState, Failure> {
        match (self.to_m, self.to_family, &self.to_amps) {
            (Some(m), None, None) => Ok(PureState::maximally_coherent(m)?),
            (None, Some(f), None) => {
                let alpha =
                    self.to_alpha.ok_or_else(|| Failure::usage("--to-family requires --to-alpha"))?;
                Ok(match f {
                    TargetFamilyArg::Psi3 => Family::Psi3.state(alpha)?,
                    TargetFamilyArg::Psi4 => Family::Psi4.state(alpha)?,
                    TargetFamilyArg::Phi3to2 => phi_3to2(alpha)?,
                    TargetFamilyArg::Phi4to3 => phi_4to3(alpha)?,
                })
            }
            (None, None, Some(a)) => Ok(PureState::from_reals(a)?),
            _ => Err(Failure::usage(
                "target spec: give exactly one of --to-m, --to-family/--to-alpha, or --to-amps",
            )),
        }
    }
}
