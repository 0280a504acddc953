//! Batch analyses over collections of clouds and distance matrices.

mod agreement;
mod biasvar;
mod matrix;
mod stacks;

pub use agreement::{average_ranks, ordering_agreement, Agreement};
pub use biasvar::{bias_variance_experiment, power_law_fit, BiasVarianceRow, BiasVarianceSpec, PowerLaw};
pub use matrix::{hybrid_matrix, pairwise_matrix, DistanceConfig, DistanceMatrix};
pub use stacks::{match_accuracy, stack_assign, StackAssignment};
