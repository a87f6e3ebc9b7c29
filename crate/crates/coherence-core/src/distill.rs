//! Closed-form m-distillation norms and fidelities, the variational oracle
//! that cross-checks them, optimal reachable targets, and one-shot
//! distillation reports.

use serde::{Deserialize, Serialize};

use crate::error::{CoherenceError, Result};
use crate::families::Family;
use crate::state::PureState;

/// A target counts as reached when F >= 1 - eps - FID_SLACK; the slack keeps
/// measure-zero exact-fidelity points (uniform states, region endpoints)
/// inside their regions despite rounding.
pub const FID_SLACK: f64 = 1e-12;

fn check_m(psi: &PureState, m: usize) -> Result<()> {
    if m == 0 || m > psi.dim() {
        return Err(CoherenceError::InvalidArgument(format!(
            "m must lie in 1..={}, got {m}",
            psi.dim()
        )));
    }
    Ok(())
}

/// Optimal split size: the k in 1..=m minimizing the average tail mass
/// S(k)/k, where S(k) is the total probability of the d-m+k smallest modes.
/// Ties resolve to the smallest k.
pub fn k_star(psi: &PureState, m: usize) -> Result<usize> {
    check_m(psi, m)?;
    Ok(split_size(&psi.sorted_profile().probs_desc, m).0)
}

// probs sorted descending; returns (k*, S(k*)) with the tail mass accumulated
// in the same order the scan used, so norm code sees identical rounding.
fn split_size(probs: &[f64], m: usize) -> (usize, f64) {
    let mut tail: f64 = probs[m..].iter().sum();
    let mut best = (1, 0.0);
    let mut best_avg = f64::INFINITY;
    for k in 1..=m {
        tail += probs[m - k];
        let avg = tail / k as f64;
        if avg < best_avg {
            best_avg = avg;
            best = (k, tail);
        }
    }
    best
}

/// The pieces of the closed-form norm: the m-k* largest magnitudes enter by
/// their l1 sum, the remaining tail by its l2 norm scaled with sqrt(k*).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormBreakdown {
    pub m: usize,
    pub k_star: usize,
    pub head_l1: f64,
    pub tail_l2: f64,
    pub norm_value: f64,
}

pub fn m_distillation_norm(psi: &PureState, m: usize) -> Result<NormBreakdown> {
    check_m(psi, m)?;
    let prof = psi.sorted_profile();
    let probs = &prof.probs_desc;
    let (k, tail_mass) = split_size(probs, m);
    let head_l1: f64 = probs[..m - k].iter().map(|p| p.sqrt()).sum();
    Ok(NormBreakdown {
        m,
        k_star: k,
        head_l1,
        tail_l2: tail_mass.sqrt(),
        norm_value: head_l1 + (k as f64 * tail_mass).sqrt(),
    })
}

/// Best achievable overlap with the m-mode uniform unit under strictly
/// incoherent processing: norm squared over m, clamped against rounding
/// overshoot.
pub fn distillation_fidelity(psi: &PureState, m: usize) -> Result<f64> {
    let nb = m_distillation_norm(psi, m)?;
    let raw = nb.norm_value * nb.norm_value / m as f64;
    debug_assert!(raw <= 1.0 + 1e-9, "fidelity overshoot {raw}");
    Ok(raw.min(1.0))
}

/// The reachable m-mode state maximizing overlap with the uniform unit: the
/// m-k* largest magnitudes survive unchanged, the tail mass spreads evenly
/// over the last k* slots. Returned in sorted-descending basis order (which
/// the construction guarantees) along with the source modes the first m
/// slots align with.
pub fn optimal_target(psi: &PureState, m: usize) -> Result<(PureState, Vec<usize>)> {
    check_m(psi, m)?;
    let prof = psi.sorted_profile();
    let probs = &prof.probs_desc;
    let (k, tail_mass) = split_size(probs, m);
    let mut amps: Vec<f64> = probs[..m - k].iter().map(|p| p.sqrt()).collect();
    let level = (tail_mass / k as f64).sqrt();
    amps.extend(std::iter::repeat(level).take(k));
    Ok((PureState::from_reals(&amps)?, prof.permutation[..m].to_vec()))
}

/// Places an m-mode target into a d-dimensional frame, slot p landing on
/// mode modes[p].
pub fn embed_target(target: &PureState, modes: &[usize], dim: usize) -> Result<PureState> {
    if modes.len() != target.dim() {
        return Err(CoherenceError::ShapeMismatch(format!(
            "{} placement modes for a {}-mode target",
            modes.len(),
            target.dim()
        )));
    }
    let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); dim];
    let mut seen = vec![false; dim];
    for (slot, &mode) in modes.iter().enumerate() {
        if mode >= dim || seen[mode] {
            return Err(CoherenceError::InvalidArgument(format!(
                "placement mode {mode} out of range or repeated"
            )));
        }
        seen[mode] = true;
        amps[mode] = target.amps()[slot];
    }
    PureState::new(amps)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MFidelity {
    pub m: usize,
    pub fidelity: f64,
    pub k_star: usize,
    pub reached: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistillationReport {
    pub epsilon: f64,
    pub per_m: Vec<MFidelity>,
    pub best_m: usize,
    pub coherence_bits: f64,
    /// Log base for the coherence figure; always 2, recorded for clarity.
    pub log_base: u8,
}

/// Largest uniform unit reachable within infidelity eps, with the whole
/// fidelity ladder attached. m = 1 always succeeds, so best_m >= 1.
pub fn one_shot_distillable_coherence(psi: &PureState, epsilon: f64) -> Result<DistillationReport> {
    if !epsilon.is_finite() || !(0.0..1.0).contains(&epsilon) {
        return Err(CoherenceError::InvalidArgument(format!(
            "epsilon must lie in [0, 1), got {epsilon}"
        )));
    }
    let mut per_m = Vec::with_capacity(psi.dim());
    let mut best_m = 1;
    for m in 1..=psi.dim() {
        let nb = m_distillation_norm(psi, m)?;
        let fidelity = (nb.norm_value * nb.norm_value / m as f64).min(1.0);
        let reached = fidelity >= 1.0 - epsilon - FID_SLACK;
        if reached {
            best_m = m;
        }
        per_m.push(MFidelity {
            m,
            fidelity,
            k_star: nb.k_star,
            reached,
        });
    }
    Ok(DistillationReport {
        epsilon,
        per_m,
        best_m,
        coherence_bits: (best_m as f64).log2(),
        log_base: 2,
    })
}

/// Independent variational evaluation of the norm: minimize
/// |x|_1 + sqrt(m)|y|_2 over splits psi = x + y with 0 <= y <= psi, by exact
/// cyclic coordinate descent in y. Test oracle only: real non-negative
/// amplitudes, dimension at most 8.
pub fn norm_oracle(psi: &PureState, m: usize) -> Result<f64> {
    check_m(psi, m)?;
    if psi.dim() > 8 {
        return Err(CoherenceError::InvalidArgument(
            "oracle is for cross-checks in dimension <= 8".into(),
        ));
    }
    if !psi.is_real_nonneg(1e-12) {
        return Err(CoherenceError::NonRealAmplitudes);
    }
    let c = psi.magnitudes();
    let d = c.len();
    let l1: f64 = c.iter().sum();
    if m == 1 {
        // |x|_1 + |y|_2 >= |x + y|_2 = 1, attained at x = 0
        return Ok(1.0);
    }
    let sm = (m as f64).sqrt();

    // f(y) = sum_i (c_i - y_i) + sm * |y|_2 is convex; for fixed others the
    // minimizer over y_i in [0, c_i] is the clamp of sqrt(R^2/(m-1)), with
    // R the l2 norm of the other coordinates (stationarity of -y_i +
    // sm*sqrt(R^2+y_i^2)).
    let mut y = c.clone();
    let mut norm_sq: f64 = y.iter().map(|v| v * v).sum();
    for _ in 0..200_000 {
        let mut shift: f64 = 0.0;
        for i in 0..d {
            let r_sq = (norm_sq - y[i] * y[i]).max(0.0);
            let best = if r_sq > 1e-300 {
                (r_sq / (m as f64 - 1.0)).sqrt().min(c[i])
            } else {
                0.0
            };
            shift = shift.max((best - y[i]).abs());
            norm_sq += best * best - y[i] * y[i];
            y[i] = best;
        }
        if shift < 1e-14 {
            break;
        }
    }
    let tail = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let head: f64 = c.iter().zip(&y).map(|(ci, yi)| ci - yi).sum();
    // the corners y = 0 and y = c bound the descent result from above only
    // up to the stopping tolerance, so take the best of the three
    Ok((head + sm * tail).min(l1).min(sm))
}

/// Parameter intervals of `family` where the m-distillation fidelity stays
/// within eps of one: coarse grid scan, then bisection of each bracketing
/// cell down to 1e-9.
pub fn region_boundaries(family: Family, m: usize, epsilon: f64) -> Result<Vec<(f64, f64)>> {
    if !epsilon.is_finite() || !(0.0..1.0).contains(&epsilon) {
        return Err(CoherenceError::InvalidArgument(format!(
            "epsilon must lie in [0, 1), got {epsilon}"
        )));
    }
    let (lo, hi) = family.domain();
    if m == 0 || m > family.dim() {
        return Err(CoherenceError::InvalidArgument(format!(
            "m must lie in 1..={}, got {m}",
            family.dim()
        )));
    }
    let pass = |alpha: f64| -> Result<bool> {
        Ok(distillation_fidelity(&family.state(alpha)?, m)? >= 1.0 - epsilon - FID_SLACK)
    };

    let n = 1000usize;
    let grid = |i: usize| lo + (hi - lo) * (i as f64) / (n as f64);
    let mut flags = Vec::with_capacity(n + 1);
    for i in 0..=n {
        flags.push(pass(grid(i))?);
    }

    let refine = |mut bad: f64, mut good: f64| -> Result<f64> {
        for _ in 0..80 {
            let mid = 0.5 * (bad + good);
            if pass(mid)? {
                good = mid;
            } else {
                bad = mid;
            }
            if (good - bad).abs() < 1e-12 {
                break;
            }
        }
        Ok(0.5 * (bad + good))
    };

    let mut out = Vec::new();
    let mut i = 0;
    while i <= n {
        if flags[i] {
            let start = i;
            while i < n && flags[i + 1] {
                i += 1;
            }
            let left = if start == 0 {
                lo
            } else {
                refine(grid(start - 1), grid(start))?
            };
            let right = if i == n { hi } else { refine(grid(i + 1), grid(i))? };
            out.push((left, right));
        }
        i += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{psi3, psi4};
    use approx::assert_abs_diff_eq;

    #[test]
    fn split_size_tie_resolves_small() {
        // flat pair: S(1)/1 = S(2)/2 = 0.5 exactly
        let s = psi3(0.0).unwrap();
        assert_eq!(k_star(&s, 2).unwrap(), 1);
    }

    #[test]
    fn uniform_state_hits_full_fidelity_at_every_m() {
        let u = PureState::maximally_coherent(4).unwrap();
        for m in 1..=4 {
            assert_abs_diff_eq!(
                distillation_fidelity(&u, m).unwrap(),
                1.0,
                epsilon = 1e-14
            );
        }
        assert_eq!(k_star(&u, 2).unwrap(), 2);
        assert_eq!(k_star(&u, 4).unwrap(), 1);
    }

    #[test]
    fn qutrit_pair_extraction_closed_form() {
        // alpha = 3/4: one heavy mode, two light; k* = 1 and the norm is
        // sqrt(3)/2 + 1/2
        let s = psi3(0.75).unwrap();
        let nb = m_distillation_norm(&s, 2).unwrap();
        assert_eq!(nb.k_star, 1);
        assert_abs_diff_eq!(nb.norm_value, 1.3660254037844386, epsilon = 1e-15);
        assert_abs_diff_eq!(nb.head_l1, 0.75f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(nb.tail_l2, 0.5, epsilon = 1e-15);
        let f = distillation_fidelity(&s, 2).unwrap();
        assert_abs_diff_eq!(f, 0.9330127018922193, epsilon = 1e-15);
        assert_abs_diff_eq!(f, 0.5 * (0.75f64.sqrt() + 0.25f64.sqrt()).powi(2), epsilon = 1e-15);
    }

    #[test]
    fn qutrit_triple_norm_near_lower_threshold() {
        let s = psi3(0.0838).unwrap();
        let nb = m_distillation_norm(&s, 3).unwrap();
        assert_eq!(nb.k_star, 1);
        let expect = (2.0 * 0.9162f64).sqrt() + 0.0838f64.sqrt();
        assert_abs_diff_eq!(nb.norm_value, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(nb.norm_value, 1.64314, epsilon = 1e-4);
        assert_abs_diff_eq!(
            distillation_fidelity(&s, 3).unwrap(),
            0.9,
            epsilon = 1e-3
        );
    }

    #[test]
    fn ququart_triple_norm_and_mirror_symmetry() {
        // alpha = 0.1 sits in the outer region: k* = 1, two heads kept
        let s = psi4(0.1).unwrap();
        let nb = m_distillation_norm(&s, 3).unwrap();
        assert_eq!(nb.k_star, 1);
        assert_abs_diff_eq!(nb.norm_value, 1.7121246595673097, epsilon = 1e-14);
        let f = distillation_fidelity(&s, 3).unwrap();
        assert_abs_diff_eq!(
            f,
            (2.0 / 3.0) * (0.1f64.sqrt() + 0.8f64.sqrt()).powi(2),
            epsilon = 1e-14
        );
        // psi4(alpha) and psi4(1/2 - alpha) are mode permutations of each
        // other, so every norm quantity coincides bit-for-bit
        let mirrored = psi4(0.4).unwrap();
        assert_eq!(
            distillation_fidelity(&s, 3).unwrap().to_bits(),
            distillation_fidelity(&mirrored, 3).unwrap().to_bits()
        );
    }

    #[test]
    fn ququart_pair_fidelity_is_always_one() {
        for i in 0..=20 {
            let alpha = 0.5 * i as f64 / 20.0;
            let f = distillation_fidelity(&psi4(alpha).unwrap(), 2).unwrap();
            assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn optimal_target_matches_norm_overlap() {
        let s = psi3(0.75).unwrap();
        let (target, modes) = optimal_target(&s, 2).unwrap();
        assert_abs_diff_eq!(target.amps()[0].re, 0.75f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(target.amps()[1].re, 0.5, epsilon = 1e-15);
        assert_eq!(modes, vec![2, 0]);
        let overlap = crate::state::overlap_fidelity(
            &target,
            &PureState::maximally_coherent(2).unwrap(),
        );
        assert_abs_diff_eq!(
            overlap,
            distillation_fidelity(&s, 2).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn optimal_target_is_sorted_and_feasible() {
        let s = PureState::from_reals(&[0.3, 0.1, 0.55, 0.05, 0.45]).unwrap();
        for m in 1..=5 {
            let (target, modes) = optimal_target(&s, m).unwrap();
            let amps = target.magnitudes();
            for w in amps.windows(2) {
                assert!(w[0] >= w[1] - 1e-15);
            }
            assert_eq!(modes.len(), m);
            assert!(crate::state::majorizes(&s, &target).feasible);
        }
    }

    #[test]
    fn embed_target_places_and_validates() {
        let t = PureState::from_reals(&[0.8, 0.6]).unwrap();
        let e = embed_target(&t, &[2, 0], 3).unwrap();
        assert_abs_diff_eq!(e.amps()[2].re, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(e.amps()[0].re, 0.6, epsilon = 1e-15);
        assert!(embed_target(&t, &[0, 0], 3).is_err());
        assert!(embed_target(&t, &[0], 3).is_err());
        assert!(embed_target(&t, &[0, 3], 3).is_err());
    }

    #[test]
    fn report_for_heavy_qutrit() {
        let r = one_shot_distillable_coherence(&psi3(0.75).unwrap(), 0.1).unwrap();
        assert_eq!(r.best_m, 2);
        assert_abs_diff_eq!(r.coherence_bits, 1.0, epsilon = 1e-15);
        assert!(r.per_m[0].reached && r.per_m[1].reached && !r.per_m[2].reached);
        assert_eq!(r.log_base, 2);
    }

    #[test]
    fn report_rejects_bad_epsilon() {
        let s = psi3(0.5).unwrap();
        assert!(one_shot_distillable_coherence(&s, 1.0).is_err());
        assert!(one_shot_distillable_coherence(&s, -0.1).is_err());
        assert!(one_shot_distillable_coherence(&s, f64::NAN).is_err());
    }

    #[test]
    fn exact_uniform_members_pass_eps_zero() {
        let r = one_shot_distillable_coherence(&psi3(1.0 / 3.0).unwrap(), 0.0).unwrap();
        assert_eq!(r.best_m, 3);
        let r = one_shot_distillable_coherence(&psi4(1.0 / 6.0).unwrap(), 0.0).unwrap();
        assert_eq!(r.best_m, 3);
        let r = one_shot_distillable_coherence(&psi4(0.25).unwrap(), 0.0).unwrap();
        assert_eq!(r.best_m, 4);
    }

    #[test]
    fn oracle_agrees_on_hand_cases() {
        let cases = [
            (psi3(0.75).unwrap(), 2),
            (psi3(0.0838).unwrap(), 3),
            (psi4(0.1).unwrap(), 3),
            (psi4(0.4).unwrap(), 3),
            (PureState::maximally_coherent(5).unwrap(), 4),
            (PureState::from_reals(&[0.9, 0.1, 0.3, 0.2, 0.1, 0.2]).unwrap(), 4),
        ];
        for (state, m) in cases {
            let closed = m_distillation_norm(&state, m).unwrap().norm_value;
            let oracle = norm_oracle(&state, m).unwrap();
            assert_abs_diff_eq!(closed, oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn oracle_rejects_phases_and_big_dims() {
        use num_complex::Complex64 as C64;
        let phased = PureState::new(vec![C64::new(0.0, 0.8), C64::new(0.6, 0.0)]).unwrap();
        assert!(matches!(
            norm_oracle(&phased, 2),
            Err(CoherenceError::NonRealAmplitudes)
        ));
        let big = PureState::maximally_coherent(9).unwrap();
        assert!(norm_oracle(&big, 2).is_err());
    }

    #[test]
    fn phases_do_not_move_the_norm() {
        use num_complex::Complex64 as C64;
        let plain = PureState::from_reals(&[0.7, 0.5, 0.4, 0.2]).unwrap();
        let phased = PureState::new(
            plain
                .amps()
                .iter()
                .enumerate()
                .map(|(i, a)| a * C64::from_polar(1.0, 0.7 * i as f64))
                .collect(),
        )
        .unwrap();
        // |r e^{i phi}|^2 lands within an ulp of r^2, not on it
        for m in 1..=4 {
            assert_abs_diff_eq!(
                m_distillation_norm(&plain, m).unwrap().norm_value,
                m_distillation_norm(&phased, m).unwrap().norm_value,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn boundary_scan_matches_quadratic_roots() {
        // F(psi3, 3) = 0.9 reduces to 9a^2 - 6.6a + 0.49 = 0
        let disc = (6.6f64 * 6.6 - 4.0 * 9.0 * 0.49).sqrt();
        let lo_root = (6.6 - disc) / 18.0;
        let hi_root = (6.6 + disc) / 18.0;
        let regions = region_boundaries(Family::Psi3, 3, 0.1).unwrap();
        assert_eq!(regions.len(), 1);
        assert_abs_diff_eq!(regions[0].0, lo_root, epsilon = 1e-9);
        assert_abs_diff_eq!(regions[0].1, hi_root, epsilon = 1e-9);
    }

    #[test]
    fn pair_region_touches_domain_edge() {
        let regions = region_boundaries(Family::Psi3, 2, 0.1).unwrap();
        assert_eq!(regions.len(), 1);
        assert_abs_diff_eq!(regions[0].0, 0.0, epsilon = 1e-12);
        // upper edge solves alpha(1 - alpha) = 0.16 exactly
        assert_abs_diff_eq!(regions[0].1, 0.8, epsilon = 1e-8);
        let all = region_boundaries(Family::Psi4, 2, 0.1).unwrap();
        assert_eq!(all, vec![(0.0, 0.5)]);
    }

    #[test]
    fn eps_zero_regions_collapse_to_exact_points_or_plateaus() {
        // psi4 m=3 holds fidelity 1 on the whole middle plateau; fidelity
        // approaches 1 quadratically at the edges (F'' = -9), so the 1e-12
        // comparison slack widens the detected plateau by sqrt(1e-12/4.5)
        let slack = 5e-7;
        let regions = region_boundaries(Family::Psi4, 3, 0.0).unwrap();
        assert_eq!(regions.len(), 1);
        assert_abs_diff_eq!(regions[0].0, 1.0 / 6.0, epsilon = 2.0 * slack);
        assert_abs_diff_eq!(regions[0].1, 1.0 / 3.0, epsilon = 2.0 * slack);
        assert!(regions[0].0 <= 1.0 / 6.0 + 1e-9 && regions[0].1 >= 1.0 / 3.0 - 1e-9);
    }
}
