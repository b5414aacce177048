//! Class constants, the Rademacher and generalization bounds, and runtime
//! verifiers for the output and perturbation inequalities.

pub mod constants;
pub mod quad;
pub mod theorem;
pub mod verify;

pub use constants::{
    analytic_alpha, class_constants, contraction_norm, klmoq, pointwise_alpha, z_closed_form,
    z_sequence, AlphaMode, ClassConstants, Klmoq,
};
pub use quad::{psi_integral_check, PsiCheck};
pub use theorem::{
    bound_report, corollary_bound, generalization_bound, rademacher_bound, BoundReport,
    RademacherInputs,
};
pub use verify::{
    verify_output_bound, verify_output_bound_with, verify_perturbation_bound,
    verify_perturbation_bound_with, InequalityReport, OutputBoundReport, PerturbationReport,
    VerifyOptions, VERIFY_RTOL,
};
