//! Hamiltonian Boundary Value Methods.
//!
//! HBVM(k,s) is a family of Runge–Kutta methods built on the k+1 Gauss–Lobatto
//! abscissae of [0,1] whose underlying stage polynomial has degree s. The
//! methods have order 2s, are symmetric, and conserve polynomial Hamiltonians
//! of degree up to 2k/s exactly. HBVM(s,s) is the Lobatto IIIA method.
//!
//! The crate is organised bottom-up:
//!
//! * [`legendre`]: shifted Legendre polynomials on [0,1] and Lobatto rules.
//! * [`tableau`]: Butcher tableaux, their validators and stability function.
//! * [`pencil`]: the block (A,B) pencil form of a method.
//! * [`hamiltonians`]: canonical test problems.
//! * [`integrator`]: the stage solver and the time-stepping driver.
//! * [`harness`]: convergence studies and energy-drift experiments.
//! * [`cli`]: the `hbvm` command line front-end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod hamiltonians;
pub mod harness;
pub mod integrator;
pub mod legendre;
pub mod pencil;
pub mod tableau;

pub use error::{HbvmError, Result};
pub use hamiltonians::{apply_j, problem_by_name, CanonicalSystem};
pub use harness::{convergence_study, drift_experiment, ConvergenceReport, DriftReport};
pub use integrator::{hbvm_step, integrate, SolverMode, SolverOptions, StageCoefficients, Trajectory};
pub use legendre::LobattoRule;
pub use pencil::BlockPencil;
pub use tableau::ButcherTableau;
