//! Coagulation with particle emission.
//!
//! Clusters react as `S_i + S_j -> S_{i+j-ell}` whenever the product is
//! nonempty (`i + j >= ell + 1`), so every reaction removes one cluster and
//! `ell` particles. This crate carries the numerical machinery for that
//! model:
//!
//! * [`kinetics`]: pure evaluation of the kinetic equations, moments,
//!   interaction mass and q-coordinates.
//! * [`markov`]: the finite-N jump process with size-proportional sampling
//!   and gel policies.
//! * [`classes`]: reaction classes and reaction numbers.
//! * [`ode`]: an L-stable implicit integrator and the small, truncated and
//!   closed large/full systems, with exhaustion-time detection.
//! * [`exact`]: closed forms, the exact rational polynomial family, the
//!   recursive integral engine and the moment hierarchy.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled; IO, CLI and file formats live in the companion `coagem` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod classes;
pub mod error;
pub mod exact;
pub mod kinetics;
pub mod markov;
pub(crate) mod math;
pub mod ode;
pub mod trajectory;

pub use error::{Error, Result};
pub use kinetics::{ClusterDistribution, EmissionParams, MomentVector, SystemKind};
pub use trajectory::{Record, Trajectory};
