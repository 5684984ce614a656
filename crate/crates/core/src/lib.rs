//! Identification of dynamical systems from noisy trajectories.
//!
//! The crate pairs two families of trajectory-fitting losses with a
//! thermodynamically structured model class:
//!
//! * [`weakform`] assembles the strong-form (one-step prediction) loss and
//!   the weak-form (test-function Galerkin) loss, both under a state-wise
//!   weighted norm.
//! * [`testfn`] builds the compactly supported polynomial bump functions the
//!   weak form integrates against, and the special three-point test
//!   functions used by the scalar analysis.
//! * [`genericnet`] provides GENERIC-structured models (`ẋ = L∇E + M∇S`)
//!   whose degeneracy conditions hold for every parameter value, plus the
//!   reverse-mode tape that differentiates through their input gradients.
//! * [`train`] runs AdamW with stepwise decay and state-wise residual-based
//!   attention on either loss.
//! * [`estimator1d`] contains closed-form estimators for `ẋ = λx`, their error
//!   decompositions and limits, and the Monte-Carlo harness around them.
//! * [`trajectory`] integrates dynamics, generates noisy datasets and
//!   computes per-state statistics; [`experiments`] glues everything into
//!   the `weakdyn` command line tool.

pub mod error;
pub mod estimator1d;
pub mod experiments;
pub mod genericnet;
pub mod testfn;
pub mod train;
pub mod trajectory;
pub mod weakform;

pub use error::{ConditionFailure, Error, Result};
