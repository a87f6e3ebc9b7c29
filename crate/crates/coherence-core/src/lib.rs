//! One-shot coherence distillation for pure qudit states: closed-form
//! distillation norms and fidelities, strictly-incoherent Kraus synthesis
//! for pure-state conversions, and a dual-rail photonic simulator that
//! cross-checks the optical constructions against the algebra.

pub mod distill;
pub mod error;
pub mod families;
pub mod optics;
pub mod state;
pub mod synthesis;

pub use distill::{
    distillation_fidelity, embed_target, k_star, m_distillation_norm, norm_oracle,
    one_shot_distillable_coherence, optimal_target, region_boundaries, DistillationReport,
    MFidelity, NormBreakdown,
};
pub use error::{CoherenceError, Result};
pub use families::{phi_3to2, phi_4to3, psi3, psi4, Family};
pub use optics::{
    circuit_fig2b, circuit_fig2d, circuit_fig2e, hwp_unitary, induced_channel, module_f,
    plan_to_circuit, readout_density, run_circuit, spatial_tomography, Branch, CircuitTemplate,
    DualRailState, Element, Pol, Readout,
};
pub use state::{majorizes, overlap_fidelity, MajorizationVerdict, PureState, SortedProfile};
pub use synthesis::{
    action_distance, angles_for_3to2, apply_channel, classify_kraus, completeness_deviation,
    embed_channel_output, embed_step, kraus_3to2, output_density, path_merge_channel,
    plan_conversion, pure_overlap, two_mode_kraus, Channel, ConversionPlan, OperationClass,
    PathMerge, SioStep,
};
