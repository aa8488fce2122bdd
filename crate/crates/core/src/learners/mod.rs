//! Learners: ℓ1-constrained regression on Pauli features, the stabilizer-probe learner for
//! shallow observables, and the linear solve of the flipped concept.

pub mod bounds;
pub mod flipped;
pub mod lasso;
pub mod shallow;
pub mod unitary;

pub use bounds::{generalization_bound, sample_complexity, BoundReport, EpsBudget};
pub use flipped::{flipped_solve, FlippedSolution};
pub use lasso::{lasso_train, project_l1, LassoConfig, LassoModel, StepRule};
pub use shallow::{shallow_learn, shallow_probe_count, Probe, ShallowLearnConfig, ShallowModel};
pub use unitary::{unitary_param_learn, UnitaryLearnConfig, UnitaryPredictor};
