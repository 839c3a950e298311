// SPDX-License-Identifier: Apache-2.0

//! Controller synthesis: centralized (joint patterns over the full state)
//! and distributed (component-local patterns under partial observation).

use serde::{Deserialize, Serialize};

use crate::tiling::ExtensionMode;

pub mod centralized;
pub mod distributed;

/// How candidate tilings are generated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TilingStrategy {
    /// Start from the trivial tiling and bisect bad tiles only.
    #[default]
    GenerateAndTest,
    /// Test the finest tiling `R_{D,uniform}` directly.
    Uniform,
}

/// How a component's over-approximation accounts for the other
/// component's mode when its rows are not exactly independent of it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Hull over every admissible mode of the other component.
    #[default]
    Hull,
    /// Row block of the joint mode pairing the local mode with the other
    /// component's first mode; exact only for separable systems.
    Nominal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    /// Maximal pattern length `K`.
    pub max_pattern_len: usize,
    /// Maximal bisection depth `D`.
    pub max_depth: u32,
    pub extension: ExtensionMode,
    #[serde(default)]
    pub strategy: TilingStrategy,
    /// Absolute slack of inclusion tests.
    #[serde(default)]
    pub slack: f64,
    #[serde(default)]
    pub coupling: Coupling,
}

impl SynthOptions {
    pub fn new(max_pattern_len: usize, max_depth: u32) -> Self {
        SynthOptions {
            max_pattern_len,
            max_depth,
            extension: ExtensionMode::Lower,
            strategy: TilingStrategy::GenerateAndTest,
            slack: 0.0,
            coupling: Coupling::Hull,
        }
    }
}

/// Why ring iteration ended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxRings,
    /// The last macro-step produced an extension below the threshold.
    BelowThreshold {
        a: f64,
    },
    RefinementFailure {
        bad_tiles: usize,
        depth: u32,
    },
    NoCommonLength {
        component: usize,
    },
    Unbounded,
}

/// Largest `a ≤ candidate` for which `holds(a)`, backing off from the
/// closed-form optimum by growing relative steps. Closes the gap between
/// the parametric bound `lo0 + lo1·a` and the interval image evaluated at
/// `a`, which round differently.
pub(crate) fn certify_extension(candidate: f64, holds: impl Fn(f64) -> bool) -> f64 {
    if holds(candidate) {
        return candidate;
    }
    let scale = candidate.abs().max(1.0);
    let mut step = 1e-14 * scale;
    while step < candidate {
        let a = candidate - step;
        if holds(a) {
            return a;
        }
        step *= 4.0;
    }
    0.0
}

pub(crate) mod float_serde {
    //! `+∞` as JSON `null`.
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
