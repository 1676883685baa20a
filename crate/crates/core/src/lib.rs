//! Truthful scheduling on unrelated machines.
//!
//! Exact-rational scheduling instances, a zoo of deterministic mechanisms,
//! weak-monotonicity checks, boundary (critical-value) functions, region
//! geometry for stars of tasks, and the adversarial construction that turns a
//! mechanism into a concrete instance certifying a makespan ratio close to n.

#![cfg_attr(not(feature = "std"), no_std)]
// errors carry exact values and are only built on cold paths
#![allow(clippy::result_large_err)]

extern crate alloc;

pub mod adversary;
pub mod boundary;
pub mod error;
pub mod geometry;
pub mod instance;
pub mod mechanism;
pub mod par;
pub mod truthcheck;
pub mod value;

pub use error::{Error, Result};
pub use instance::{makespan, opt_makespan, Allocation, Instance, MultiStar, Star, Task, TaskId};
pub use mechanism::{AllocationOracle, MechanismSpec, PaymentRule};
pub use value::ExactValue;
