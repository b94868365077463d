//! Pair quantities, bubble integrals, structural constants, leading-order
//! projection predictions and the elementary power inequalities.

mod constants;
mod inequalities;
mod integrals;
mod pair;
mod prediction;

pub use constants::{bubble_dilation_pairing, structural_constants, write_constants_csv, ConstantValue, StructuralConstants};
pub use inequalities::{inequality_suite, InequalityCheck, INEQUALITY_BOUND};
pub use integrals::{
    bubble_lp_norm, bubble_power_integral, cross_integral, fit_interaction_constant, lp_scaling_law, riesz_potential_profile,
    InteractionFit, McEstimate, McOptions, Region,
};
pub use pair::{pair_quantities, PairInteraction, PairRegime};
pub use prediction::{projection_prediction, Prediction, PredictionInput};
