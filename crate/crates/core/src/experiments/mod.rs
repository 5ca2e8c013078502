//! Ladder studies built on the solvers: convergence, perturbed data,
//! breakdown time, superposition, interaction intervals and diagnostics.

pub mod bootstrap;
pub mod breakdown;
pub mod convergence;
pub mod fit;
pub mod growth;
pub mod interaction;
pub mod ladder;
pub mod perturbed;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod superposition;

pub use bootstrap::{bootstrap_diagnostics, BootstrapReport};
pub use breakdown::{run_breakdown_time, BreakdownStudy};
pub use convergence::{run_main_convergence, run_smoke, ConvergenceStudy, StudyOptions};
pub use interaction::{interaction_ladder, measure_interaction_interval, InteractionReport};
pub use perturbed::{run_perturbed_data, PerturbedStudy};
pub use pipeline::{run_point, ErrorSeries};
pub use report::{Artifacts, Gate};
pub use scenario::{Perturbation, Scenario};
pub use superposition::{run_superposition, SuperpositionStudy};
