// SPDX-License-Identifier: Apache-2.0

//! JSON configuration: system, modes, constraints, objective and options.
//!
//! ```json
//! {
//!   "system": { "discrete": { "maps": [ { "A": [[0.5]], "c": [0.0] },
//!                                       { "A": [[0.5]], "c": [10.0] } ] } },
//!   "split": [1, 0],
//!   "modes": [ { "actuators": 1 } ],
//!   "R": [[18.0, 22.0]],
//!   "synthesis": { "K": 1, "D": 0 }
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AffineMap, Interval, Rect};
use crate::linalg::Matrix;
use crate::synth::{Coupling, SynthOptions, TilingStrategy};
use crate::system::{discretize, ComponentModes, ContinuousSpec, ModeSet, SwitchedSystem};
use crate::tiling::ExtensionMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub system: SystemBlock,
    pub split: Vec<usize>,
    pub modes: Vec<ModesBlock>,
    #[serde(default)]
    pub constraints: Constraints,
    #[serde(rename = "R")]
    pub objective: Vec<Vec<f64>>,
    pub synthesis: SynthesisBlock,
    #[serde(default)]
    pub runtime: RuntimeBlock,
    /// `E` of the perturbation `x ↦ f_u(x) + E·w`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_sensitivity: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemBlock {
    Discrete(Dynamics),
    Continuous(Dynamics),
}

/// Per-mode dynamics, given either explicitly (`maps`, one per joint mode
/// in canonical order before filtering) or as a base `A, c` plus one
/// additive `A, c` per actuator.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dynamics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<Vec<ModeDynamics>>,
    #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
    pub base_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, rename = "c", skip_serializing_if = "Option::is_none")]
    pub base_offset: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actuators: Option<Vec<ModeDynamics>>,
    /// Continuous input direction of the exogenous signal; its exact
    /// discretization under the base dynamics gives `offset_sensitivity`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_input: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeDynamics {
    #[serde(rename = "A")]
    pub matrix: Vec<Vec<f64>>,
    #[serde(rename = "c")]
    pub offset: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModesBlock {
    Labels(Vec<String>),
    Actuators { actuators: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_max_active: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_component_max_active: Vec<Option<u32>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthMode {
    #[default]
    Centralized,
    Distributed,
    Stability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct SynthesisBlock {
    pub K: usize,
    pub D: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_max_rings")]
    pub max_rings: usize,
    #[serde(default)]
    pub extension: ExtensionMode,
    #[serde(default)]
    pub mode: SynthMode,
    #[serde(default)]
    pub strategy: TilingStrategy,
    #[serde(default)]
    pub slack: f64,
    #[serde(default)]
    pub coupling: Coupling,
}

fn default_eta() -> f64 {
    0.1
}

fn default_max_rings() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeBlock {
    /// Schedule file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<PathBuf>,
    #[serde(default)]
    pub x0: Vec<Vec<f64>>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl Default for RuntimeBlock {
    fn default() -> Self {
        RuntimeBlock {
            schedule: None,
            x0: Vec::new(),
            max_steps: default_max_steps(),
        }
    }
}

fn default_max_steps() -> usize {
    1000
}

/// Parses JSON, reporting the path of the offending field.
pub(crate) fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            Error::Parse(inner.to_string())
        } else {
            Error::config(
                if path == "." {
                    "<root>".to_string()
                } else {
                    path
                },
                inner.to_string(),
            )
        }
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn matrix(rows: &[Vec<f64>], n: usize, field: &str) -> Result<Matrix> {
    let m = Matrix::from_rows(rows).ok_or_else(|| Error::config(field, "ragged matrix rows"))?;
    if m.rows() != n || m.cols() != n {
        return Err(Error::config(
            field,
            format!("expected a {n}×{n} matrix, got {}×{}", m.rows(), m.cols()),
        ));
    }
    if !m.is_finite() {
        return Err(Error::config(field, "non-finite entry"));
    }
    Ok(m)
}

fn vector(v: &[f64], n: usize, field: &str) -> Result<Vec<f64>> {
    if v.len() != n {
        return Err(Error::config(
            field,
            format!("expected {n} entries, got {}", v.len()),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::config(field, "non-finite entry"));
    }
    Ok(v.to_vec())
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config> {
        let cfg: Config = parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let mut cfg = Config::from_json(&read_text(path)?)?;
        if let (Some(s), Some(dir)) = (&cfg.runtime.schedule, path.parent()) {
            if s.is_relative() {
                cfg.runtime.schedule = Some(dir.join(s));
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn dim(&self) -> usize {
        self.split.iter().sum()
    }

    /// Checks every field that does not need the system to be built.
    pub fn validate(&self) -> Result<()> {
        if self.split.is_empty() || self.split.len() > 2 {
            return Err(Error::config("split", "expected [n1] or [n1, n2]"));
        }
        if self.split[0] == 0 {
            return Err(Error::config(
                "split",
                "the first component needs at least one state",
            ));
        }
        let components = self.split.iter().filter(|&&n| n > 0).count();
        if self.modes.len() != components {
            return Err(Error::config(
                "modes",
                format!(
                    "expected mode lists for {components} component(s), got {}",
                    self.modes.len()
                ),
            ));
        }
        for (c, m) in self.modes.iter().enumerate() {
            match m {
                ModesBlock::Labels(l) if l.is_empty() => {
                    return Err(Error::config(format!("modes[{c}]"), "no modes listed"))
                }
                ModesBlock::Actuators { actuators } if *actuators > 16 => {
                    return Err(Error::config(
                        format!("modes[{c}].actuators"),
                        "at most 16 actuators per component",
                    ))
                }
                _ => {}
            }
        }
        if self.constraints.per_component_max_active.len() > components {
            return Err(Error::config(
                "constraints.per_component_max_active",
                "more entries than components",
            ));
        }
        self.objective()?;
        let s = &self.synthesis;
        if s.K == 0 {
            return Err(Error::config("synthesis.K", "must be at least 1"));
        }
        if s.D > 30 {
            return Err(Error::config(
                "synthesis.D",
                "depth above 30 is not supported",
            ));
        }
        if !(s.eta >= 0.0) || !s.eta.is_finite() {
            return Err(Error::config(
                "synthesis.eta",
                "must be a non-negative number",
            ));
        }
        if !(s.slack >= 0.0) || !s.slack.is_finite() {
            return Err(Error::config(
                "synthesis.slack",
                "must be a non-negative number",
            ));
        }
        match (s.mode, s.epsilon) {
            (SynthMode::Distributed | SynthMode::Stability, None) => {
                return Err(Error::config(
                    "synthesis.epsilon",
                    "required for this synthesis mode",
                ))
            }
            (SynthMode::Distributed, Some(e)) if !(e > 0.0) || !e.is_finite() => {
                return Err(Error::config("synthesis.epsilon", "must be positive"))
            }
            (_, Some(e)) if !(e >= 0.0) || !e.is_finite() => {
                return Err(Error::config("synthesis.epsilon", "must be non-negative"))
            }
            _ => {}
        }
        if s.mode == SynthMode::Distributed && components != 2 {
            return Err(Error::config(
                "split",
                "distributed synthesis needs two non-empty components",
            ));
        }
        for (i, x) in self.runtime.x0.iter().enumerate() {
            vector(x, self.dim(), &format!("runtime.x0[{i}]"))?;
        }
        if let Some(e) = &self.offset_sensitivity {
            vector(e, self.dim(), "offset_sensitivity")?;
        }
        Ok(())
    }

    pub fn objective(&self) -> Result<Rect> {
        if self.objective.len() != self.dim() {
            return Err(Error::config(
                "R",
                format!(
                    "expected {} intervals, got {}",
                    self.dim(),
                    self.objective.len()
                ),
            ));
        }
        let intervals = self
            .objective
            .iter()
            .enumerate()
            .map(|(j, b)| match b.as_slice() {
                [lo, hi] if lo.is_finite() && hi.is_finite() && lo < hi => Interval::new(*lo, *hi),
                _ => Err(Error::config(
                    format!("R[{j}]"),
                    "expected [lo, hi] with lo < hi",
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        Rect::new(intervals)
    }

    pub fn synth_options(&self) -> SynthOptions {
        let s = &self.synthesis;
        SynthOptions {
            max_pattern_len: s.K,
            max_depth: s.D,
            extension: s.extension,
            strategy: s.strategy,
            slack: s.slack,
            coupling: s.coupling,
        }
    }

    fn component_modes(&self) -> Vec<ComponentModes> {
        self.modes
            .iter()
            .map(|m| match m {
                ModesBlock::Labels(l) => ComponentModes::from_labels(l.clone()),
                ModesBlock::Actuators { actuators } => ComponentModes::binary(*actuators),
            })
            .collect()
    }

    /// Builds the discrete-time system, discretizing if needed.
    pub fn build_system(&self) -> Result<SwitchedSystem> {
        self.validate()?;
        let n = self.dim();
        let raw = self.component_modes();
        let raw_n2 = raw.get(1).map_or(1, ComponentModes::len);
        let (block, field, continuous) = match &self.system {
            SystemBlock::Discrete(d) => (d, "system.discrete", false),
            SystemBlock::Continuous(d) => (d, "system.continuous", true),
        };
        let (modes, kept) = ModeSet::filtered(
            raw.clone(),
            &self.constraints.per_component_max_active,
            self.constraints.global_max_active,
        )
        .map_err(|e| Error::config("constraints", e.to_string()))?;
        let joint_raw: Vec<(usize, usize)> = (0..modes.joint_count())
            .map(|u| {
                let (i1, i2) = modes.split_joint(u);
                let o1 = kept[0][i1];
                let o2 = kept.get(1).map_or(0, |k| k[i2]);
                (o1, o2)
            })
            .collect();

        let per_mode: Vec<(Matrix, Vec<f64>)> = match (&block.maps, &block.actuators) {
            (Some(maps), None) => {
                if block.base_matrix.is_some() || block.base_offset.is_some() {
                    return Err(Error::config(
                        format!("{field}.A"),
                        "base dynamics only go with `actuators`",
                    ));
                }
                let expected = raw[0].len() * raw_n2;
                if maps.len() != expected {
                    return Err(Error::config(
                        format!("{field}.maps"),
                        format!(
                            "expected {expected} maps (one per joint mode), got {}",
                            maps.len()
                        ),
                    ));
                }
                joint_raw
                    .iter()
                    .map(|&(o1, o2)| {
                        let idx = o1 * raw_n2 + o2;
                        let m = &maps[idx];
                        Ok((
                            matrix(&m.matrix, n, &format!("{field}.maps[{idx}].A"))?,
                            vector(&m.offset, n, &format!("{field}.maps[{idx}].c"))?,
                        ))
                    })
                    .collect::<Result<_>>()?
            }
            (None, Some(acts)) => {
                let base_a = matrix(
                    block.base_matrix.as_deref().ok_or_else(|| {
                        Error::config(format!("{field}.A"), "missing base matrix")
                    })?,
                    n,
                    &format!("{field}.A"),
                )?;
                let base_c = vector(
                    block.base_offset.as_deref().ok_or_else(|| {
                        Error::config(format!("{field}.c"), "missing base offset")
                    })?,
                    n,
                    &format!("{field}.c"),
                )?;
                let widths = raw
                    .iter()
                    .enumerate()
                    .map(|(c, m)| {
                        actuator_width(m).ok_or_else(|| {
                            Error::config(
                                format!("modes[{c}]"),
                                "actuator dynamics need on/off bitstring labels of equal length",
                            )
                        })
                    })
                    .collect::<Result<Vec<usize>>>()?;
                let total: usize = widths.iter().sum();
                if acts.len() != total {
                    return Err(Error::config(
                        format!("{field}.actuators"),
                        format!("expected {total} actuators, got {}", acts.len()),
                    ));
                }
                let deltas = acts
                    .iter()
                    .enumerate()
                    .map(|(j, m)| {
                        Ok((
                            matrix(&m.matrix, n, &format!("{field}.actuators[{j}].A"))?,
                            vector(&m.offset, n, &format!("{field}.actuators[{j}].c"))?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                joint_raw
                    .iter()
                    .map(|&(o1, o2)| {
                        let mut on: Vec<bool> =
                            raw[0].labels[o1].chars().map(|ch| ch == '1').collect();
                        if let Some(m2) = raw.get(1) {
                            on.extend(m2.labels[o2].chars().map(|ch| ch == '1'));
                        }
                        let mut a = base_a.clone();
                        let mut c = base_c.clone();
                        for ((da, dc), _) in deltas.iter().zip(&on).filter(|(_, &b)| b) {
                            a = a.add(da);
                            c.iter_mut().zip(dc).for_each(|(x, d)| *x += d);
                        }
                        (a, c)
                    })
                    .collect()
            }
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    format!("{field}.maps"),
                    "give either `maps` or `actuators`, not both",
                ))
            }
            (None, None) => {
                return Err(Error::config(
                    field,
                    "needs `maps` or `A`, `c` and `actuators`",
                ))
            }
        };

        let split = (self.split[0], self.split.get(1).copied().unwrap_or(0));
        let mut offset_sensitivity = self.offset_sensitivity.clone();
        let (dynamics, tau) = if continuous {
            let tau = block.tau_s.ok_or_else(|| {
                Error::config(format!("{field}.tau_s"), "missing sampling period")
            })?;
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::config(format!("{field}.tau_s"), "must be positive"));
            }
            let (drift, offset): (Vec<Matrix>, Vec<Vec<f64>>) = per_mode.into_iter().unzip();
            let maps = discretize(&ContinuousSpec {
                drift,
                offset,
                tau_s: tau,
            })?;
            if let Some(b) = &block.env_input {
                if offset_sensitivity.is_some() {
                    return Err(Error::config(
                        "offset_sensitivity",
                        "give either this or `env_input`",
                    ));
                }
                let b = vector(b, n, &format!("{field}.env_input"))?;
                let base = match (&block.base_matrix, &block.maps) {
                    (Some(rows), _) => matrix(rows, n, &format!("{field}.A"))?,
                    (None, Some(maps)) => {
                        matrix(&maps[0].matrix, n, &format!("{field}.maps[0].A"))?
                    }
                    (None, None) => unreachable!("checked above"),
                };
                let e = discretize(&ContinuousSpec {
                    drift: vec![base],
                    offset: vec![b],
                    tau_s: tau,
                })?;
                offset_sensitivity = Some(e[0].offset.clone());
            }
            (maps, Some(tau))
        } else {
            if block.tau_s.is_some() {
                return Err(Error::config(
                    format!("{field}.tau_s"),
                    "only meaningful for continuous systems",
                ));
            }
            if block.env_input.is_some() {
                return Err(Error::config(
                    format!("{field}.env_input"),
                    "only meaningful for continuous systems",
                ));
            }
            let maps = per_mode
                .into_iter()
                .map(|(a, c)| AffineMap::new(a, c))
                .collect::<Result<Vec<_>>>()?;
            (maps, None)
        };
        let mut sys = SwitchedSystem::new(split, modes, dynamics)?;
        if let Some(tau) = tau {
            sys = sys.with_sampling_period(tau);
        }
        if let Some(e) = offset_sensitivity {
            sys = sys.with_offset_sensitivity(e)?;
        }
        Ok(sys)
    }
}

fn actuator_width(m: &ComponentModes) -> Option<usize> {
    let w = m.labels.first()?.len();
    m.labels
        .iter()
        .all(|l| l.len() == w && l.chars().all(|c| c == '0' || c == '1'))
        .then_some(w)
}
