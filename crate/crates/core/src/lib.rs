//! Approval voting for selecting system updates with expert input.
//!
//! Experts with reputation weights approve or reject candidate updates; the
//! update with the most approving weight is implemented and experts are paid
//! according to their vote on it once its quality is revealed. This crate
//! provides the mechanism itself ([`mechanism`]), reward-schedule design
//! ([`params`]), exhaustive equilibrium analysis ([`analysis`]) and the
//! repeated game with reputation weight updates ([`repeated`]).
//!
//! ```
//! use avgov::mechanism::{honest_profile, winner, Instance};
//! use avgov::params::derive_schedule;
//!
//! let schedule = derive_schedule(0.9, 19.0, 1.0).unwrap();
//! assert_eq!((schedule.a, schedule.s), (2.0, 17.0));
//!
//! let instance = Instance::without_externals(
//!     vec![0.49, 0.41, 0.10],
//!     vec![vec![0.95, 1.0], vec![1.0, 0.95], vec![1.0, 0.0]],
//! )
//! .unwrap();
//! let votes = honest_profile(&instance, schedule.threshold);
//! assert_eq!(winner(&instance, &votes).unwrap().winner, Some(0));
//! ```

// `!(x > y)` is used deliberately so that NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod mechanism;
pub mod params;
pub mod repeated;

pub use error::{Error, Result};
