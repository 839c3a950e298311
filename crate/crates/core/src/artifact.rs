// SPDX-License-Identifier: Apache-2.0

//! Controller artifacts: the synthesized rings together with the system
//! they were computed for.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{parse_json, read_text, Config, SynthMode};
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::synth::centralized::{iterate_synthesis, stability_synthesis, Ring};
use crate::synth::distributed::{
    iterate_synthesis_distributed, stability_synthesis_distributed, DistRing,
};
use crate::synth::StopReason;
use crate::system::SwitchedSystem;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Controller {
    /// Rings `R^(1), R^(2), …` (innermost first) and an optional stability
    /// ring on the objective.
    Centralized {
        stability: Option<Ring>,
        rings: Vec<Ring>,
    },
    Distributed {
        stability: DistRing,
        rings: Vec<DistRing>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub format_version: u32,
    pub tool_version: String,
    /// SHA-256 of the canonical JSON of the generating config.
    pub config_hash: String,
    pub mode: SynthMode,
    pub system: SwitchedSystem,
    pub objective: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopReason>,
    pub controller: Controller,
}

pub fn config_hash(cfg: &Config) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    format!("{:x}", Sha256::digest(canonical.as_bytes()))
}

/// Runs the synthesis the config asks for.
pub fn synthesize(cfg: &Config) -> Result<Artifact> {
    let sys = cfg.build_system()?;
    let objective = cfg.objective()?;
    let opts = cfg.synth_options();
    let s = &cfg.synthesis;
    let (controller, stop) = match s.mode {
        SynthMode::Stability => {
            let eps = s.epsilon.expect("validated");
            let ring = stability_synthesis(&sys, &objective, eps, &opts)?;
            (
                Controller::Centralized {
                    stability: Some(ring),
                    rings: Vec::new(),
                },
                None,
            )
        }
        SynthMode::Centralized => {
            let it = iterate_synthesis(&sys, &objective, &opts, s.eta, s.max_rings)?;
            // without an ε the stability ring is the first ring's table at a = 0
            let stability = match s.epsilon {
                Some(eps) => Some(stability_synthesis(&sys, &objective, eps, &opts)?),
                None => None,
            };
            (
                Controller::Centralized {
                    stability,
                    rings: it.rings,
                },
                Some(it.stop),
            )
        }
        SynthMode::Distributed => {
            let eps = s.epsilon.expect("validated");
            let stability = stability_synthesis_distributed(&sys, &objective, eps, &opts)?;
            let it =
                iterate_synthesis_distributed(&sys, &objective, eps, &opts, s.eta, s.max_rings)?;
            (
                Controller::Distributed {
                    stability,
                    rings: it.rings,
                },
                Some(it.stop),
            )
        }
    };
    Ok(Artifact {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(cfg),
        mode: s.mode,
        system: sys,
        objective,
        stop,
        controller,
    })
}

impl Artifact {
    pub fn ring_count(&self) -> usize {
        match &self.controller {
            Controller::Centralized { rings, .. } => rings.len(),
            Controller::Distributed { rings, .. } => rings.len(),
        }
    }

    /// Per-ring extensions `a^(1), a^(2), …`.
    pub fn extensions(&self) -> Vec<f64> {
        match &self.controller {
            Controller::Centralized { rings, .. } => rings.iter().map(|r| r.a).collect(),
            Controller::Distributed { rings, .. } => rings.iter().map(|r| r.a).collect(),
        }
    }

    pub fn total_extension(&self) -> f64 {
        self.extensions().iter().sum()
    }

    /// The capture set `S`: the outermost extended ring, or the objective.
    pub fn outer_box(&self) -> Rect {
        match &self.controller {
            Controller::Centralized { rings, .. } => rings
                .last()
                .map_or(self.objective.clone(), |r| r.extended.clone()),
            Controller::Distributed { rings, .. } => rings
                .last()
                .map_or(self.objective.clone(), DistRing::extended),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Artifact> {
        let mut art: Artifact = parse_json(text)?;
        if art.format_version != FORMAT_VERSION {
            return Err(Error::config(
                "format_version",
                format!(
                    "unsupported artifact version {} (expected {FORMAT_VERSION})",
                    art.format_version
                ),
            ));
        }
        art.system = art.system.revalidate()?;
        if art.objective.dims() != art.system.dim() {
            return Err(Error::config(
                "objective",
                "dimension differs from the system",
            ));
        }
        Ok(art)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Artifact> {
        Artifact::from_json(&read_text(path)?)
    }
}
