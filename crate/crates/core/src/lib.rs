//! Convex C¹ extension of finite 1-jets.
//!
//! Given points `y_i` with values `f_i` and gradients `G_i`, decide whether a
//! convex C¹ function with that jet exists and, when it does, evaluate one:
//!
//! 1. [`jet`]: pairwise slacks and the validators for conditions (C)/(CW¹).
//! 2. [`modulus`]: the growth modulus of the minimal extension, a concave
//!    majorant of it and its integral.
//! 3. [`envelope`]: the smoothed upper function `g` and its convex envelope,
//!    computed by linear programming over a candidate set ([`lp`]).
//! 4. [`verify`]: reference convex functions and property checks.

pub mod envelope;
pub mod error;
pub mod jet;
mod linalg;
pub mod lp;
pub mod modulus;
pub mod verify;

pub use envelope::{
    build_extension, minimal_extension, psi, DomainBox, EnvelopeResult, EvalMode, EvalStatus, ExtensionConfig,
    ExtensionModel,
};
pub use error::{JetError, Result};
pub use jet::{compute_slack, load_dataset, validate, JetDataset, JetPoint, SlackMatrix, Tolerances, ValidationReport};
pub use modulus::{build_modulus, omega0_closed, GapProfile, ModulusModel};

/// Validate, build the modulus and assemble a model in one call.
///
/// Returns the validation report alongside; the model is built regardless of
/// the report's status, so callers decide whether to refuse invalid jets.
pub fn build_pipeline(
    dataset: &JetDataset,
    tolerances: &Tolerances,
    nodes: usize,
    t_max: Option<f64>,
    domain_box: Option<DomainBox>,
    config: ExtensionConfig,
) -> Result<(ExtensionModel, ValidationReport)> {
    let slack = compute_slack(dataset);
    let report = validate(&slack, tolerances, dataset);
    let profile = GapProfile::from_slack(&slack, dataset.data_scale(), tolerances);
    let modulus = build_modulus(&profile, nodes, t_max)?;
    let dbox = domain_box.unwrap_or_else(|| DomainBox::around(dataset));
    let model = build_extension(dataset, &slack, &modulus, dbox, config)?;
    Ok((model, report))
}
