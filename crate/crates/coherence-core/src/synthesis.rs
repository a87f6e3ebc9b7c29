//! Kraus-level synthesis of strictly incoherent conversions: elementary
//! two-mode steps, their embedding into d modes, a planner that chains them
//! into a full pure-state conversion, the dedicated 3->2 distillation
//! family, and classification of arbitrary Kraus sets.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{CoherenceError, Result};
use crate::state::{majorizes, PureState, PROB_TOL};

/// Frobenius tolerance on sum(K^dag K) - I.
pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Entries below this are structural zeros for classification purposes.
pub const ENTRY_TOL: f64 = 1e-12;
/// Output branches lighter than this are dropped by apply_channel.
pub const BRANCH_TOL: f64 = 1e-14;

fn zeros(rows: usize, cols: usize) -> Array2<C64> {
    Array2::from_elem((rows, cols), C64::new(0.0, 0.0))
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Frobenius norm of sum(K^dag K) - I over the input space.
pub fn completeness_deviation(ops: &[Array2<C64>]) -> f64 {
    if ops.is_empty() {
        return f64::INFINITY;
    }
    let d = ops[0].ncols();
    let mut acc = zeros(d, d);
    for k in ops {
        let kd = k.mapv(|z| z.conj()).reversed_axes();
        acc = acc + kd.dot(k);
    }
    for i in 0..d {
        acc[(i, i)] -= real(1.0);
    }
    acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// A validated Kraus family: nonempty, uniform shape, resolves the identity.
#[derive(Debug, Clone)]
pub struct Channel {
    kraus: Vec<Array2<C64>>,
}

impl Channel {
    pub fn from_kraus(kraus: Vec<Array2<C64>>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(CoherenceError::ShapeMismatch("empty Kraus family".into()));
        }
        let shape = kraus[0].dim();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(CoherenceError::ShapeMismatch("zero-sized Kraus operator".into()));
        }
        if kraus.iter().any(|k| k.dim() != shape) {
            return Err(CoherenceError::ShapeMismatch(
                "Kraus operators must share one shape".into(),
            ));
        }
        let deviation = completeness_deviation(&kraus);
        if deviation > COMPLETENESS_TOL {
            return Err(CoherenceError::IncompleteChannel { deviation });
        }
        Ok(Self { kraus })
    }

    pub fn identity(d: usize) -> Self {
        let mut k = zeros(d, d);
        for i in 0..d {
            k[(i, i)] = real(1.0);
        }
        Self { kraus: vec![k] }
    }

    pub fn kraus(&self) -> &[Array2<C64>] {
        &self.kraus
    }

    pub fn input_dim(&self) -> usize {
        self.kraus[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn to_json(&self) -> String {
        let enc = ChannelJson {
            out_dim: self.output_dim(),
            in_dim: self.input_dim(),
            kraus: self
                .kraus
                .iter()
                .map(|k| k.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&enc).expect("channel serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let enc: ChannelJson = serde_json::from_str(text)
            .map_err(|e| CoherenceError::InvalidArgument(format!("bad channel JSON: {e}")))?;
        let n = enc.out_dim * enc.in_dim;
        let mut ops = Vec::with_capacity(enc.kraus.len());
        for flat in &enc.kraus {
            if flat.len() != n {
                return Err(CoherenceError::ShapeMismatch(format!(
                    "operator has {} entries, shape says {n}",
                    flat.len()
                )));
            }
            let data: Vec<C64> = flat.iter().map(|[re, im]| C64::new(*re, *im)).collect();
            ops.push(
                Array2::from_shape_vec((enc.out_dim, enc.in_dim), data)
                    .expect("length checked above"),
            );
        }
        Self::from_kraus(ops)
    }
}

/// Row-major complex entries as [re, im] pairs, one flat list per operator.
#[derive(Serialize, Deserialize)]
struct ChannelJson {
    out_dim: usize,
    in_dim: usize,
    kraus: Vec<Vec<[f64; 2]>>,
}

/// Where a Kraus family sits in the incoherent-operation hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationClass {
    /// Every operator has at most one nonzero entry per row and per column.
    Sio,
    /// Incoherent (one nonzero per column) but some operator merges rows.
    IoNotSio,
    NotIo,
}

/// Classifies a Kraus family, insisting on completeness first.
pub fn classify_kraus(ops: &[Array2<C64>]) -> Result<OperationClass> {
    let deviation = completeness_deviation(ops);
    if deviation > COMPLETENESS_TOL {
        return Err(CoherenceError::IncompleteChannel { deviation });
    }
    let mut io = true;
    let mut sio = true;
    for k in ops {
        for col in k.columns() {
            if col.iter().filter(|z| z.norm() > ENTRY_TOL).count() > 1 {
                io = false;
                sio = false;
            }
        }
        for row in k.rows() {
            if row.iter().filter(|z| z.norm() > ENTRY_TOL).count() > 1 {
                sio = false;
            }
        }
    }
    Ok(if sio {
        OperationClass::Sio
    } else if io {
        OperationClass::IoNotSio
    } else {
        OperationClass::NotIo
    })
}

/// Applies the channel to a pure input, returning normalized branches with
/// their weights; branches below BRANCH_TOL are dropped.
pub fn apply_channel(ch: &Channel, psi: &PureState) -> Result<Vec<(f64, PureState)>> {
    if psi.dim() != ch.input_dim() {
        return Err(CoherenceError::ShapeMismatch(format!(
            "state dimension {} vs channel input {}",
            psi.dim(),
            ch.input_dim()
        )));
    }
    let mut out = Vec::new();
    for k in &ch.kraus {
        let v: Array1<C64> = k.dot(psi.amps());
        let w: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if w > BRANCH_TOL {
            let scale = real(1.0 / w.sqrt());
            out.push((w, PureState::new(v.iter().map(|z| z * scale).collect())?));
        }
    }
    Ok(out)
}

/// Output density matrix sum(K psi psi^dag K^dag).
pub fn output_density(ch: &Channel, psi: &PureState) -> Result<Array2<C64>> {
    if psi.dim() != ch.input_dim() {
        return Err(CoherenceError::ShapeMismatch(format!(
            "state dimension {} vs channel input {}",
            psi.dim(),
            ch.input_dim()
        )));
    }
    let d = ch.output_dim();
    let mut rho = zeros(d, d);
    for k in &ch.kraus {
        let v: Array1<C64> = k.dot(psi.amps());
        for r in 0..d {
            for c in 0..d {
                rho[(r, c)] += v[r] * v[c].conj();
            }
        }
    }
    Ok(rho)
}

/// <target| rho |target>, the figure of merit for every readout here.
pub fn pure_overlap(rho: &Array2<C64>, target: &PureState) -> Result<f64> {
    let d = target.dim();
    if rho.dim() != (d, d) {
        return Err(CoherenceError::ShapeMismatch(format!(
            "density shape {:?} vs target dimension {d}",
            rho.dim()
        )));
    }
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..d {
        for c in 0..d {
            acc += target.amps()[r].conj() * rho[(r, c)] * target.amps()[c];
        }
    }
    Ok(acc.re)
}

/// One elementary two-mode move: modes i and j mix through plate angles
/// theta1..theta3 (radians, stored as half-angles of the physical 2-theta
/// rotations), succeeding with branch weight `a`. `intermediate` is the
/// real amplitude vector after the step in the frame it was built in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SioStep {
    pub i: usize,
    pub j: usize,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub a: f64,
    pub intermediate: Vec<f64>,
}

// Core of the two-mode construction. p,q are the source pair probabilities,
// cap_p,cap_q the target pair probabilities (same total mass). Returns
// (a, sin 2theta1, cos 2theta2). Errors when the pair transfer is
// infeasible, which is exactly when a leaves [0,1].
fn pair_angles(p: f64, q: f64, cap_p: f64, cap_q: f64) -> Result<(f64, f64, f64)> {
    let denom = cap_p - cap_q;
    if denom.abs() < PROB_TOL {
        // equal targets force p = q = cap_p; anything else has no two-mode
        // solution (mass conservation pins p+q, majorization pins max)
        if (p - cap_p).abs() < 1e-9 && (q - cap_q).abs() < 1e-9 {
            return Ok((1.0, 1.0, 1.0));
        }
        return Err(CoherenceError::Infeasible { first_violation: 0 });
    }
    let a_raw = (p - cap_q) / denom;
    if !(-1e-9..=1.0 + 1e-9).contains(&a_raw) {
        return Err(CoherenceError::Infeasible { first_violation: 0 });
    }
    let a = a_raw.clamp(0.0, 1.0);
    let ra = a.sqrt();
    let (u, v) = (p.sqrt(), q.sqrt());
    let (x, y) = (cap_p.sqrt(), cap_q.sqrt());
    let s1 = if u > 1e-15 { (ra * x / u).min(1.0) } else { 0.0 };
    let c2 = if v > 1e-15 {
        (ra * y / v).min(1.0)
    } else if y <= 1e-15 {
        1.0
    } else {
        0.0
    };
    Ok((a, s1, c2))
}

/// Builds the two-outcome Kraus pair carrying a two-mode pure state onto
/// another with both branches landing exactly on the target:
/// K1 = sin2t1|0><0| + cos2t2|1><1| and K2 = sin2t2|0><1| + cos2t1|1><0|.
/// Both states must be real non-negative; infeasible transfers error.
pub fn two_mode_kraus(psi: &PureState, phi: &PureState) -> Result<(SioStep, Channel)> {
    if psi.dim() != 2 || phi.dim() != 2 {
        return Err(CoherenceError::ShapeMismatch(
            "two_mode_kraus expects a pair of two-mode states".into(),
        ));
    }
    if !psi.is_real_nonneg(ENTRY_TOL) || !phi.is_real_nonneg(ENTRY_TOL) {
        return Err(CoherenceError::NonRealAmplitudes);
    }
    let (p, q) = (psi.prob(0), psi.prob(1));
    let (cap_p, cap_q) = (phi.prob(0), phi.prob(1));
    let (a, s1, c2) = pair_angles(p, q, cap_p, cap_q)?;
    let step = SioStep {
        i: 0,
        j: 1,
        theta1: s1.asin() / 2.0,
        theta2: c2.acos() / 2.0,
        theta3: a.sqrt().min(1.0).acos() / 2.0,
        a,
        intermediate: vec![cap_p.sqrt(), cap_q.sqrt()],
    };
    let channel = embed_step(&step, 2)?;
    Ok((step, channel))
}

/// Embeds a two-mode step into dimension d: bystander modes ride along with
/// cos2t3 in the keep branch and sin2t3 in the swap branch, which keeps
/// every branch of a chained plan on the exact target. a = 1 collapses K1
/// to the identity and kills K2.
pub fn embed_step(step: &SioStep, d: usize) -> Result<Channel> {
    let (i, j) = (step.i, step.j);
    if i >= d || j >= d || i == j {
        return Err(CoherenceError::InvalidArgument(format!(
            "step modes ({i}, {j}) do not fit dimension {d}"
        )));
    }
    let (s1, c1) = (2.0 * step.theta1).sin_cos();
    let (s2, c2) = (2.0 * step.theta2).sin_cos();
    let (s3, c3) = (2.0 * step.theta3).sin_cos();
    let mut k1 = zeros(d, d);
    let mut k2 = zeros(d, d);
    for m in 0..d {
        if m != i && m != j {
            k1[(m, m)] = real(c3);
            k2[(m, m)] = real(s3);
        }
    }
    k1[(i, i)] = real(s1);
    k1[(j, j)] = real(c2);
    k2[(i, j)] = real(s2);
    k2[(j, i)] = real(c1);
    Channel::from_kraus(vec![k1, k2])
}

/// A chained conversion: the elementary steps in order, an optional final
/// mode relabeling, and the composed total channel (2^steps operators, the
/// relabeling folded in).
#[derive(Debug, Clone)]
pub struct ConversionPlan {
    pub steps: Vec<SioStep>,
    /// relabel[old_mode] = new_mode, applied after the last step.
    pub relabel: Option<Vec<usize>>,
    pub source: PureState,
    pub target: PureState,
    pub total: Channel,
}

/// Permutation matrix for relabel[old] = new.
pub fn permutation_matrix(perm: &[usize]) -> Array2<C64> {
    let d = perm.len();
    let mut p = zeros(d, d);
    for (old, &new) in perm.iter().enumerate() {
        p[(new, old)] = real(1.0);
    }
    p
}

fn argsort_desc(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    order
}

/// Plans a strictly incoherent conversion from one real non-negative pure
/// state to another. The target may have fewer modes; it is zero-padded.
/// Greedy pairing in the sorted frame: repeatedly fix the first sorted slot
/// still short of its target using the first later slot with surplus. Each
/// round produces one two-mode step, and at most d-1 rounds are needed.
pub fn plan_conversion(source: &PureState, target: &PureState) -> Result<ConversionPlan> {
    let d = source.dim();
    if target.dim() > d {
        return Err(CoherenceError::InvalidArgument(format!(
            "target dimension {} exceeds source dimension {d}",
            target.dim()
        )));
    }
    if !source.is_real_nonneg(ENTRY_TOL) || !target.is_real_nonneg(ENTRY_TOL) {
        return Err(CoherenceError::NonRealAmplitudes);
    }
    let mut padded = target.magnitudes();
    padded.resize(d, 0.0);
    let target_full = PureState::from_reals(&padded)?;

    let verdict = majorizes(source, &target_full);
    if !verdict.feasible {
        return Err(CoherenceError::Infeasible {
            first_violation: verdict.first_violation.unwrap(),
        });
    }

    let src_amps = source.magnitudes();
    let tgt_probs: Vec<f64> = padded.iter().map(|x| x * x).collect();
    if src_amps
        .iter()
        .zip(&padded)
        .all(|(a, b)| (a - b).abs() <= PROB_TOL)
    {
        return Ok(ConversionPlan {
            steps: Vec::new(),
            relabel: None,
            source: source.clone(),
            target: target_full,
            total: Channel::identity(d),
        });
    }

    let t_sorted: Vec<f64> = {
        let mut t = tgt_probs.clone();
        t.sort_by(|a, b| b.partial_cmp(a).unwrap());
        t
    };

    let cur: Vec<f64> = src_amps.iter().map(|x| x * x).collect();
    // work in a frame sorted once up front and never re-sorted: a slot in
    // deficit only ever receives mass (capped by its target) and a slot in
    // surplus only ever gives, so slot roles are permanent, each transfer
    // pins at least one slot for good, and d-1 steps always suffice.
    // re-sorting mid-chain instead lets a drained mode climb back into a
    // surplus slot and the chain can then outrun the step budget.
    let view = argsort_desc(&cur);
    let mut slot: Vec<f64> = view.iter().map(|&m| cur[m]).collect();
    let mut steps: Vec<SioStep> = Vec::new();
    loop {
        if steps.len() > d {
            return Err(CoherenceError::InvalidState(
                "planner failed to converge".into(),
            ));
        }
        let deficit = (0..d).find(|&p| slot[p] < t_sorted[p] - PROB_TOL);
        let Some(a_pos) = deficit else { break };
        let surplus = (a_pos + 1..d)
            .find(|&p| slot[p] > t_sorted[p] + PROB_TOL)
            .or_else(|| (a_pos + 1..d).find(|&p| slot[p] > t_sorted[p]));
        let Some(b_pos) = surplus else {
            return Err(CoherenceError::InvalidState(
                "planner imbalance: deficit with no matching surplus".into(),
            ));
        };
        let delta = (t_sorted[a_pos] - slot[a_pos]).min(slot[b_pos] - t_sorted[b_pos]);
        let (mut new_a, mut new_b) = (slot[a_pos] + delta, slot[b_pos] - delta);
        // snap residues of normalization dust: a drained mode must hit its
        // target exactly or sqrt amplifies the 1e-17 leftovers into 1e-8
        // Kraus entries (branches stay exact for any snapped angles)
        if (new_a - t_sorted[a_pos]).abs() < PROB_TOL {
            new_a = t_sorted[a_pos];
        }
        if (new_b - t_sorted[b_pos]).abs() < PROB_TOL {
            new_b = t_sorted[b_pos];
        }
        // the receiving slot never sinks below the giving one, so i keeps the
        // larger target and pair_angles cannot see an equal-target degeneracy
        let (a, s1, c2) = pair_angles(slot[a_pos], slot[b_pos], new_a, new_b)?;
        slot[a_pos] = new_a;
        slot[b_pos] = new_b;
        steps.push(SioStep {
            i: view[a_pos],
            j: view[b_pos],
            theta1: s1.asin() / 2.0,
            theta2: c2.acos() / 2.0,
            theta3: a.sqrt().min(1.0).acos() / 2.0,
            a,
            intermediate: {
                let mut amps = vec![0.0; d];
                for p in 0..d {
                    amps[view[p]] = slot[p].sqrt();
                }
                amps
            },
        });
    }

    let view_f = view;
    let view_t = argsort_desc(&tgt_probs);
    let mut perm: Vec<usize> = (0..d).collect();
    for p in 0..d {
        perm[view_f[p]] = view_t[p];
    }
    let relabel = if perm.iter().enumerate().all(|(i, &v)| i == v) {
        None
    } else {
        Some(perm)
    };

    let mut ops: Vec<Array2<C64>> = vec![Channel::identity(d).kraus[0].clone()];
    for step in &steps {
        let pair = embed_step(step, d)?;
        let mut next = Vec::with_capacity(ops.len() * 2);
        for op in &ops {
            for k in pair.kraus() {
                next.push(k.dot(op));
            }
        }
        ops = next;
    }
    if let Some(perm) = &relabel {
        let p = permutation_matrix(perm);
        ops = ops.iter().map(|op| p.dot(op)).collect();
    }

    Ok(ConversionPlan {
        steps,
        relabel,
        source: source.clone(),
        target: target_full,
        total: Channel::from_kraus(ops)?,
    })
}

/// The four-operator 3->2 cascade family on five plate angles (radians,
/// half-angle convention). Returns the operators and whether they resolve
/// the identity; the family satisfies completeness for every real angle
/// vector, so the flag only turns false under fault injection.
pub fn kraus_3to2(angles: &[f64; 5]) -> (Vec<Array2<C64>>, bool) {
    let s: Vec<f64> = angles.iter().map(|t| (2.0 * t).sin()).collect();
    let c: Vec<f64> = angles.iter().map(|t| (2.0 * t).cos()).collect();
    let mut k1 = zeros(2, 3);
    k1[(0, 0)] = real(-c[0] * s[3]);
    k1[(1, 2)] = real(c[2]);
    let mut k2 = zeros(2, 3);
    k2[(0, 0)] = real(c[0] * c[3]);
    k2[(1, 1)] = real(s[1]);
    let mut k3 = zeros(2, 3);
    k3[(0, 1)] = real(-c[1] * s[4]);
    k3[(1, 2)] = real(-s[2]);
    let mut k4 = zeros(2, 3);
    k4[(1, 0)] = real(s[0]);
    k4[(0, 1)] = real(c[1] * c[4]);
    let ops = vec![k1, k2, k3, k4];
    let ok = completeness_deviation(&ops) <= COMPLETENESS_TOL;
    (ops, ok)
}

/// Plate angles that make every branch of the 3->2 cascade land exactly on
/// the two-mode uniform unit when fed the qutrit family member at `alpha`.
/// Valid for alpha in [0, 1/2].
pub fn angles_for_3to2(alpha: f64) -> Result<[f64; 5]> {
    if !alpha.is_finite() || !(0.0..=0.5).contains(&alpha) {
        return Err(CoherenceError::InvalidArgument(format!(
            "cascade angles exist for alpha in [0, 0.5], got {alpha}"
        )));
    }
    let t12 = (1.0 / (2.0 * (1.0 - alpha)).sqrt()).acos() / 2.0;
    let t45 = -(1.0 - 2.0 * alpha).sqrt().min(1.0).acos() / 2.0;
    Ok([t12, t12, -std::f64::consts::FRAC_PI_8, t45, t45])
}

/// One source mode folded onto a destination mode, calibrated to the input
/// amplitudes so the keep outcome concentrates (src_amp, dst_amp) fully
/// onto dst.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PathMerge {
    pub src: usize,
    pub dst: usize,
    pub src_amp: f64,
    pub dst_amp: f64,
}

/// Two-outcome channel performing disjoint pairwise mode merges; untouched
/// modes pass through the first operator. The merge rows carry two entries,
/// so this is incoherent but not strictly incoherent.
pub fn path_merge_channel(dim: usize, merges: &[PathMerge]) -> Result<Channel> {
    let mut used = vec![false; dim];
    let mut k1 = zeros(dim, dim);
    let mut k2 = zeros(dim, dim);
    for m in merges {
        if m.src >= dim || m.dst >= dim || m.src == m.dst {
            return Err(CoherenceError::InvalidArgument(format!(
                "merge ({}, {}) does not fit dimension {dim}",
                m.src, m.dst
            )));
        }
        if used[m.src] || used[m.dst] {
            return Err(CoherenceError::InvalidArgument(
                "merge modes must be pairwise disjoint".into(),
            ));
        }
        used[m.src] = true;
        used[m.dst] = true;
        let r = m.src_amp.hypot(m.dst_amp);
        if r < 1e-12 || m.src_amp < 0.0 || m.dst_amp < 0.0 {
            return Err(CoherenceError::InvalidArgument(
                "merge amplitudes must be non-negative with positive norm".into(),
            ));
        }
        let (x, y) = (m.src_amp / r, m.dst_amp / r);
        k1[(m.dst, m.src)] = real(x);
        k1[(m.dst, m.dst)] = real(y);
        k2[(m.dst, m.src)] = real(-y);
        k2[(m.dst, m.dst)] = real(x);
    }
    for (mode, taken) in used.iter().enumerate() {
        if !taken {
            k1[(mode, mode)] = real(1.0);
        }
    }
    Channel::from_kraus(vec![k1, k2])
}

/// Rewrites each Kraus operator into a larger output space, logical row r
/// landing on row map[r]. Completeness is untouched.
pub fn embed_channel_output(ch: &Channel, map: &[usize], out_dim: usize) -> Result<Channel> {
    if map.len() != ch.output_dim() {
        return Err(CoherenceError::ShapeMismatch(format!(
            "{} row placements for output dimension {}",
            map.len(),
            ch.output_dim()
        )));
    }
    let mut seen = vec![false; out_dim];
    for &row in map {
        if row >= out_dim || seen[row] {
            return Err(CoherenceError::InvalidArgument(format!(
                "row placement {row} out of range or repeated"
            )));
        }
        seen[row] = true;
    }
    let kraus = ch
        .kraus
        .iter()
        .map(|k| {
            let mut big = zeros(out_dim, k.ncols());
            for (r, &row) in map.iter().enumerate() {
                for c in 0..k.ncols() {
                    big[(row, c)] = k[(r, c)];
                }
            }
            big
        })
        .collect();
    Channel::from_kraus(kraus)
}

/// Upper bound on the worst-case trace distance between the outputs of two
/// channels, maximized over a spanning set of pure inputs: basis states and
/// the +/i two-mode superpositions. Uses (1/2)sqrt(d)|Delta|_F, which
/// dominates the trace distance without an eigendecomposition.
pub fn action_distance(a: &Channel, b: &Channel) -> Result<f64> {
    if a.input_dim() != b.input_dim() || a.output_dim() != b.output_dim() {
        return Err(CoherenceError::ShapeMismatch(format!(
            "channel shapes {}x{} vs {}x{}",
            a.output_dim(),
            a.input_dim(),
            b.output_dim(),
            b.input_dim()
        )));
    }
    let d = a.input_dim();
    let mut probes: Vec<PureState> = Vec::new();
    for i in 0..d {
        probes.push(PureState::basis(d, i)?);
    }
    let h = 1.0 / 2.0f64.sqrt();
    for i in 0..d {
        for j in i + 1..d {
            let mut v = vec![C64::new(0.0, 0.0); d];
            v[i] = real(h);
            v[j] = real(h);
            probes.push(PureState::new(v.clone())?);
            v[j] = C64::new(0.0, h);
            probes.push(PureState::new(v)?);
        }
    }
    let scale = 0.5 * (a.output_dim() as f64).sqrt();
    let mut worst: f64 = 0.0;
    for probe in &probes {
        let delta = output_density(a, probe)? - output_density(b, probe)?;
        let fro = delta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(scale * fro);
    }
    Ok(worst)
}
