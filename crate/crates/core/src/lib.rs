//! Transient models of a router queue under active queue management.
//!
//! The crate pairs two views of the same closed-loop system:
//!
//! * a diffusion approximation of the G/G/1 and G/G/1/N queue, stepped under
//!   piecewise-constant parameters and coupled to an AQM drop-probability
//!   controller and an additive-increase/halve-on-loss traffic source;
//! * a discrete-event simulation of the identical system, used to
//!   cross-validate the diffusion results.
//!
//! Start with the [`feedback`] module for the mixed diffusion/decision loop,
//! [`des`] for the event-driven counterpart, and [`harness`] for config-file
//! driven experiments with CSV/JSON output. The numerical building blocks
//! live in [`diffusion`] (barrier densities, first-passage times, the
//! two-barrier Volterra evolution), [`laplace`] (Stehfest inversion) and
//! [`controllers`] (RED and the fractional-order PI controller).

pub mod controllers;
pub mod des;
pub mod diffusion;
pub mod ensemble;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod laplace;
mod math;

pub use error::{Error, Result};
