//! Kernel support vector machines trained on dependent observations.
//!
//! The crate bundles the pieces needed to study regularized kernel machines
//! on non-i.i.d. data:
//!
//! * [`loss`]: convex margin- and distance-based losses with their analytic
//!   constants (local Lipschitz constants, growth types, sup at zero).
//! * [`kernel`]: kernels, Gram matrices and finite kernel expansions.
//! * [`solver`]: an exact dual coordinate solver for the regularized risk
//!   `λ‖f‖²_H + (1/n) Σ L(yᵢ, f(xᵢ))` with a duality-gap certificate, plus the
//!   stability witness comparing sample and reference solutions.
//! * [`process`]: dependent data generators (Markov chains, AR(1), noisy
//!   doubling map, i.i.d.) with analytic stationary means and Bayes risks.
//! * [`mixing`]: exact α, β, φ and maximal-correlation coefficients of
//!   finite joints, Markov lag joints and bi-mixing averages.
//! * [`schedule`]: power schedules `λₙ = c·n^(−γ)` and their validity
//!   verdicts under the consistency conditions.
//! * [`harness`]: consistency, stability and law-of-large-numbers sweeps.
//!
//! Data-parallel loops go through [`par`]; the `parallel` feature (on by
//! default) backs them with rayon, otherwise they run sequentially.

pub mod error;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod loss;
pub mod mixing;
pub mod par;
pub mod process;
pub mod quad;
pub mod schedule;
pub mod solver;

pub use error::{Error, Result};
pub use kernel::{KernelKind, KernelSpec, RkhsFunction};
pub use loss::{LossFamily, LossKind, LossSpec};
pub use par::Execution;
pub use process::ProcessSpec;
pub use schedule::{ScheduleSpec, Verdict};
pub use solver::{SolverOptions, SvmSolution, TrainingSet};
