//! Finite-horizon decision processes on discrete-time semi-Markov dynamics.
//!
//! The controlled process is Markov only jointly with its sojourn age, so
//! every table here is indexed by the extended state `(x, t)`. Starting at
//! age 0, stage `n` can only reach ages `t <= n`, and tables store exactly
//! those cells.
//!
//! - [`env`], [`validate`], [`transitions`]: environments in stay/jump form.
//! - [`bellman`]: backward induction, policy evaluation and a path
//!   enumeration oracle.
//! - [`qlearn`]: tabular Q-learning with sup-norm error tracking.
//! - [`simulate`], [`hmap`], [`diagnostics`]: episode sampling, the Markov
//!   additive time change, inter-jump laws and chi-square tests.
//! - [`coins`]: the switching uneven coins environment.
//! - [`metrics`], [`format`]: batch reward curves and file formats.

pub mod bellman;
pub mod coins;
pub mod diagnostics;
pub mod env;
pub mod error;
pub mod format;
pub mod hmap;
pub mod metrics;
pub mod qlearn;
pub mod reachable;
pub mod rng;
pub mod simulate;
pub mod sojourn;
pub mod tables;
pub mod transitions;
pub mod validate;

pub use env::{EnvBuilder, EnvSpec, ExtendedState};
pub use error::{Result, SmdpError};
pub use reachable::{reachable_index, ReachableSet};
pub use tables::{Policy, QTable, ValueTable};
pub use validate::{validate_env, ValidationReport};
