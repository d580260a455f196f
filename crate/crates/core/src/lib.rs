//! Joint unsharp measurement of complementary qubit observables.
//!
//! An object qubit is entangled with a probe qubit and both are measured
//! along arbitrary spin directions. Pulled back to the object's input state,
//! the four outcome pairs form a rank-1 four-outcome POVM whose three binary
//! marginals are two smeared `σ3` observables and one smeared equatorial
//! observable `σ_n`. The crate provides:
//!
//! - [`qubit`]: Pauli-coefficient effects, qubit states and the two-qubit
//!   tensor-product expectation used as ground truth.
//! - [`scheme`]: the final entangled state, the closed-form four effects and
//!   the oracle check between them.
//! - [`marginals`]: marginal POVMs, contrasts, unsharpness, the pay-off
//!   relations, variance and sharp-probability reconstruction.
//! - [`coexistence`]: analytic joint measurability criteria for unbiased
//!   pairs and a numerical feasibility search for arbitrary binary pairs.
//! - [`montecarlo`]: seeded counting experiments and estimators.
//! - [`cli`]: the `jointmeas` command-line front end.

pub mod cli;
pub mod coexistence;
mod error;
pub mod marginals;
pub mod montecarlo;
pub mod qubit;
pub mod scheme;

pub use error::{Error, Result};
