//! Pure qudit states in a fixed incoherent basis, their sorted probability
//! profiles, and the majorization test that decides convertibility.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{CoherenceError, Result};

/// Slack applied to probability comparisons (partial sums, thresholds).
pub const PROB_TOL: f64 = 1e-12;
/// Norm below which a vector is treated as zero.
pub const ZERO_TOL: f64 = 1e-12;

/// Normalized pure state. Amplitudes live in a distinguished basis; all
/// coherence quantities in this crate are relative to that basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Array1<C64>,
}

impl PureState {
    /// Builds a state from raw amplitudes, normalizing. Rejects empty or
    /// (numerically) zero vectors and non-finite entries.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(CoherenceError::InvalidState("empty amplitude vector".into()));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(CoherenceError::InvalidState("non-finite amplitude".into()));
        }
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if norm_sq.sqrt() < ZERO_TOL {
            return Err(CoherenceError::InvalidState("zero amplitude vector".into()));
        }
        let scale = 1.0 / norm_sq.sqrt();
        Ok(Self {
            amps: Array1::from_iter(amps.into_iter().map(|a| a * scale)),
        })
    }

    /// Convenience constructor for real amplitude lists.
    pub fn from_reals(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// The m-dimensional uniform-superposition unit, the target of every
    /// distillation in this crate.
    pub fn maximally_coherent(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(CoherenceError::InvalidArgument("dimension must be positive".into()));
        }
        let a = 1.0 / (m as f64).sqrt();
        Self::from_reals(&vec![a; m])
    }

    /// Basis vector |i> in dimension d.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(CoherenceError::InvalidArgument(format!(
                "basis index {i} out of range for dimension {d}"
            )));
        }
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Self::from_reals(&v)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &Array1<C64> {
        &self.amps
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.amps[i].norm_sqr()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// |amps| entrywise; the coefficients c_i that feed the norm machinery.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm()).collect()
    }

    pub fn is_real_nonneg(&self, tol: f64) -> bool {
        self.amps.iter().all(|a| a.im.abs() <= tol && a.re >= -tol)
    }

    /// Splits the state into its magnitude profile and the stripped phases,
    /// one phase per mode (zero where the amplitude vanishes). Diagonal
    /// unitaries are free here, so every norm below depends only on the
    /// first component.
    pub fn strip_phases(&self) -> (PureState, Vec<f64>) {
        let phases: Vec<f64> = self
            .amps
            .iter()
            .map(|a| if a.norm() < ZERO_TOL { 0.0 } else { a.arg() })
            .collect();
        let mags = PureState {
            amps: self.amps.iter().map(|a| C64::new(a.norm(), 0.0)).collect(),
        };
        (mags, phases)
    }

    /// Stable descending sort of the probability vector, remembering where
    /// each sorted slot came from.
    pub fn sorted_profile(&self) -> SortedProfile {
        let probs = self.probabilities();
        let mut order: Vec<usize> = (0..probs.len()).collect();
        // sort_by is stable, so ties keep ascending original indices
        order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap());
        let probs_desc = order.iter().map(|&i| probs[i]).collect();
        SortedProfile {
            probs_desc,
            permutation: order,
        }
    }
}

/// Probability profile sorted descending. `permutation[p]` is the original
/// mode index occupying sorted slot `p`; the copy is bit-exact, no
/// re-arithmetic happens during the sort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SortedProfile {
    pub probs_desc: Vec<f64>,
    pub permutation: Vec<usize>,
}

impl SortedProfile {
    /// Undoes the sort, recovering the original probability vector exactly.
    pub fn unsorted(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.probs_desc.len()];
        for (slot, &orig) in self.permutation.iter().enumerate() {
            out[orig] = self.probs_desc[slot];
        }
        out
    }
}

/// Outcome of the majorization test, with both cumulative-sum ladders kept
/// for reporting and the first crossing when the test fails.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MajorizationVerdict {
    pub feasible: bool,
    pub partial_sums_source: Vec<f64>,
    pub partial_sums_target: Vec<f64>,
    pub first_violation: Option<usize>,
}

/// Whether `source` can be converted to `target` by a strictly incoherent
/// channel: the target's sorted partial sums must dominate the source's.
/// States of different dimension are compared after zero-padding the shorter.
pub fn majorizes(source: &PureState, target: &PureState) -> MajorizationVerdict {
    let d = source.dim().max(target.dim());
    let pad = |s: &PureState| {
        let mut p = s.sorted_profile().probs_desc;
        p.resize(d, 0.0);
        p
    };
    let src = pad(source);
    let tgt = pad(target);

    let cumsum = |v: &[f64]| {
        let mut acc = 0.0;
        v.iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect::<Vec<f64>>()
    };
    let ps = cumsum(&src);
    let pt = cumsum(&tgt);

    let first_violation = ps
        .iter()
        .zip(&pt)
        .position(|(s, t)| *s > *t + PROB_TOL);
    MajorizationVerdict {
        feasible: first_violation.is_none(),
        partial_sums_source: ps,
        partial_sums_target: pt,
        first_violation,
    }
}

/// |<a|b>|^2 with the shorter state zero-padded.
pub fn overlap_fidelity(a: &PureState, b: &PureState) -> f64 {
    let n = a.dim().min(b.dim());
    let mut ip = C64::new(0.0, 0.0);
    for i in 0..n {
        ip += a.amps()[i].conj() * b.amps()[i];
    }
    ip.norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_zero_vector() {
        assert!(PureState::from_reals(&[0.0, 0.0]).is_err());
        assert!(PureState::new(vec![]).is_err());
        assert!(PureState::from_reals(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn normalizes_on_construction() {
        let s = PureState::from_reals(&[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(s.prob(0), 0.36, epsilon = 1e-15);
        assert_abs_diff_eq!(s.prob(1), 0.64, epsilon = 1e-15);
    }

    #[test]
    fn maximally_coherent_is_uniform() {
        let s = PureState::maximally_coherent(4).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(s.prob(i), 0.25, epsilon = 1e-15);
        }
        assert!(PureState::maximally_coherent(0).is_err());
    }

    #[test]
    fn sorted_profile_round_trips_bit_exactly() {
        let s = PureState::from_reals(&[0.2, 0.7, 0.1, 0.66]).unwrap();
        let probs = s.probabilities();
        let prof = s.sorted_profile();
        for w in prof.probs_desc.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let recovered = prof.unsorted();
        for (a, b) in probs.iter().zip(&recovered) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn sorted_profile_ties_keep_original_order() {
        let s = PureState::from_reals(&[0.5, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(s.sorted_profile().permutation, vec![0, 1, 2, 3]);
    }

    #[test]
    fn strip_phases_keeps_magnitudes() {
        let s = PureState::new(vec![
            C64::new(0.0, 0.6),
            C64::new(-0.8, 0.0),
        ])
        .unwrap();
        let (mags, phases) = s.strip_phases();
        assert!(mags.is_real_nonneg(0.0));
        assert_abs_diff_eq!(mags.prob(0), 0.36, epsilon = 1e-15);
        assert_abs_diff_eq!(phases[0], std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(phases[1], std::f64::consts::PI, epsilon = 1e-15);
    }

    #[test]
    fn majorization_uniform_to_anything() {
        // the uniform profile is majorized by every profile of equal or
        // smaller support
        let u = PureState::maximally_coherent(4).unwrap();
        let t = PureState::from_reals(&[0.9, 0.1, 0.4, 0.2]).unwrap();
        assert!(majorizes(&u, &t).feasible);
        assert!(majorizes(&u, &PureState::basis(4, 2).unwrap()).feasible);
    }

    #[test]
    fn majorization_detects_violation() {
        let s = PureState::from_reals(&[0.95_f64.sqrt(), 0.05_f64.sqrt()]).unwrap();
        let t = PureState::maximally_coherent(2).unwrap();
        let v = majorizes(&s, &t);
        assert!(!v.feasible);
        assert_eq!(v.first_violation, Some(0));
    }

    #[test]
    fn majorization_pads_dimensions() {
        let s = PureState::maximally_coherent(3).unwrap();
        let t = PureState::maximally_coherent(2).unwrap();
        assert!(majorizes(&s, &t).feasible);
        assert!(!majorizes(&t, &s).feasible);
    }

    #[test]
    fn overlap_pads_shorter_state() {
        let a = PureState::maximally_coherent(2).unwrap();
        let b = PureState::maximally_coherent(4).unwrap();
        // <2 modes|4 modes> = 2 * (1/sqrt2)(1/2) = 1/sqrt2
        assert_abs_diff_eq!(overlap_fidelity(&a, &b), 0.5, epsilon = 1e-14);
    }
}
