// SPDX-License-Identifier: Apache-2.0

//! Correct-by-design controller synthesis for switched affine systems.
//!
//! Given a discrete-time switched system `x(t+1) = M_u x(t) + c_u` with a
//! finite mode set and a rectangular objective region `R`, the crate builds
//! nested capture rings `R ⊂ R^(1) ⊂ R^(2) ⊂ …` together with tile-to-pattern
//! tables that steer every state of `R^(i)` into `R^(i-1)` in one macro-step.
//! Both a centralized controller (full state observation) and a distributed
//! one (each component observes only its own sub-state) are supported.
//!
//! Module map:
//! - [`geometry`]: boxes, affine maps, interval images, parametric bounds.
//! - [`system`]: switched-system model, control patterns, discretization.
//! - [`tiling`]: bisection tilings and their parametric extension.
//! - [`synth`]: centralized and distributed synthesis.
//! - [`runtime`]: closed-loop simulation and certificate verification.
//! - [`config`] / [`artifact`]: file formats used by the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod artifact;
pub mod config;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod runtime;
pub mod synth;
pub mod system;
pub mod tiling;

pub use error::{Error, Result};
