//! Finite-size randomness certification for semi-device-independent QRNGs.
//!
//! The crate computes secure finite-size randomness generation rates for
//! source-independent (SI) and measurement-device-independent (MDI) quantum
//! random number generators. The pipeline is:
//!
//! 1. model the optical setup and predict nominal outcome statistics
//!    ([`optics`]),
//! 2. bound the adversary's guessing probability by a semidefinite program
//!    ([`si`], [`mdi`] on top of the dense solver in [`sdp`]),
//! 3. extract and independently verify a dual certificate whose operator
//!    inequalities hold for *any* device behavior,
//! 4. turn the certificate plus observed counts into a final random-bit
//!    length via Azuma-type martingale concentration ([`finitesize`]).
//!
//! The crate is `no_std` (with `alloc`); IO, configuration, and the sweep
//! CLI live in the companion `sdiq-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod matcore;
pub mod sdp;
pub mod si;
pub mod mdi;
pub mod finitesize;
pub mod optics;

pub use matcore::{ComplexScalar, HermitianOperator, PureState};
