// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("refinement failed: {bad_tiles} bad tile(s) remain at depth {depth}")]
    Refinement { bad_tiles: usize, depth: u32 },

    #[error("no pattern length is admissible for every tile of component {component}")]
    NoCommonLength { component: usize },

    #[error("extension parameter is unbounded; the objective region is reached from everywhere")]
    Unbounded,

    #[error("state {state:?} lies outside the controlled domain")]
    OutOfDomain { state: Vec<f64> },

    #[error("no table entry for tile {tile} of ring {ring}")]
    TableMiss { ring: usize, tile: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            got,
        }
    }
}
