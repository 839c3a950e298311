// SPDX-License-Identifier: Apache-2.0

//! Switched affine systems, control patterns and exact discretization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{compose, AffineMap};
use crate::linalg::{expm, Matrix};

/// Modes of one control component after constraint filtering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentModes {
    pub labels: Vec<String>,
    /// Number of actuators switched on by each mode.
    pub active: Vec<u32>,
}

impl ComponentModes {
    pub fn new(labels: Vec<String>, active: Vec<u32>) -> Result<Self> {
        if labels.len() != active.len() {
            return Err(Error::dim("component modes", labels.len(), active.len()));
        }
        Ok(ComponentModes { labels, active })
    }

    /// Labels that are bitstrings count their `1`s as active actuators.
    pub fn from_labels(labels: Vec<String>) -> Self {
        let active = labels
            .iter()
            .map(|l| {
                if !l.is_empty() && l.chars().all(|c| c == '0' || c == '1') {
                    l.chars().filter(|&c| c == '1').count() as u32
                } else {
                    0
                }
            })
            .collect();
        ComponentModes { labels, active }
    }

    /// All `2^actuators` on/off vectors, in binary counting order (first
    /// actuator is the leftmost character).
    pub fn binary(actuators: usize) -> Self {
        let labels = (0..1usize << actuators)
            .map(|m| {
                (0..actuators)
                    .map(|j| {
                        if m >> (actuators - 1 - j) & 1 == 1 {
                            '1'
                        } else {
                            '0'
                        }
                    })
                    .collect()
            })
            .collect();
        ComponentModes::from_labels(labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Finite control set `U = U1 × U2` with optional "simultaneously active" limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    components: Vec<ComponentModes>,
    global_max_active: Option<u32>,
}

/// Which mode sequences to enumerate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Component(usize),
    Joint,
}

impl ModeSet {
    /// `components` holds one or two entries; a single-component system is
    /// treated as having a trivial second component with one mode.
    pub fn new(components: Vec<ComponentModes>, global_max_active: Option<u32>) -> Result<Self> {
        let mut components = components;
        match components.len() {
            1 => components.push(ComponentModes::new(vec![String::new()], vec![0])?),
            2 => {}
            k => {
                return Err(Error::Model(format!(
                    "expected 1 or 2 control components, got {k}"
                )))
            }
        }
        if components.iter().any(ComponentModes::is_empty) {
            return Err(Error::Model(
                "a control component has no admissible mode".into(),
            ));
        }
        let set = ModeSet {
            components,
            global_max_active,
        };
        if set.joint_allowed().all(|ok| !ok) {
            return Err(Error::Model(
                "no joint mode satisfies the global constraint".into(),
            ));
        }
        Ok(set)
    }

    /// Applies per-component "max simultaneously active" filters.
    pub fn filtered(
        components: Vec<ComponentModes>,
        per_component_max_active: &[Option<u32>],
        global_max_active: Option<u32>,
    ) -> Result<(Self, Vec<Vec<usize>>)> {
        let mut kept_all = Vec::new();
        let mut out = Vec::new();
        for (c, comp) in components.into_iter().enumerate() {
            let limit = per_component_max_active.get(c).copied().flatten();
            let kept: Vec<usize> = (0..comp.len())
                .filter(|&i| limit.is_none_or(|m| comp.active[i] <= m))
                .collect();
            out.push(ComponentModes {
                labels: kept.iter().map(|&i| comp.labels[i].clone()).collect(),
                active: kept.iter().map(|&i| comp.active[i]).collect(),
            });
            kept_all.push(kept);
        }
        Ok((ModeSet::new(out, global_max_active)?, kept_all))
    }

    pub fn component(&self, c: usize) -> &ComponentModes {
        &self.components[c]
    }

    pub fn component_count(&self, c: usize) -> usize {
        self.components[c].len()
    }

    pub fn global_max_active(&self) -> Option<u32> {
        self.global_max_active
    }

    /// `N = N1 · N2`, including joint modes excluded by the global limit.
    pub fn joint_count(&self) -> usize {
        self.components[0].len() * self.components[1].len()
    }

    pub fn joint_index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.components[1].len() + i2
    }

    pub fn split_joint(&self, u: usize) -> (usize, usize) {
        let n2 = self.components[1].len();
        (u / n2, u % n2)
    }

    pub fn is_joint_allowed(&self, u: usize) -> bool {
        let (i1, i2) = self.split_joint(u);
        let active = self.components[0].active[i1] + self.components[1].active[i2];
        self.global_max_active.is_none_or(|m| active <= m)
    }

    fn joint_allowed(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.joint_count()).map(|u| self.is_joint_allowed(u))
    }

    pub fn joint_label(&self, u: usize) -> String {
        let (i1, i2) = self.split_joint(u);
        let l2 = &self.components[1].labels[i2];
        if l2.is_empty() {
            self.components[0].labels[i1].clone()
        } else {
            format!("{}|{}", self.components[0].labels[i1], l2)
        }
    }

    /// Admissible single-step choices for a scope, in increasing index order.
    pub fn choices(&self, scope: Scope) -> Vec<usize> {
        match scope {
            Scope::Component(c) => (0..self.components[c].len()).collect(),
            Scope::Joint => (0..self.joint_count())
                .filter(|&u| self.is_joint_allowed(u))
                .collect(),
        }
    }
}

/// Per-component mode-index sequences of a common length.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pattern {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

impl Pattern {
    pub fn new(first: Vec<usize>, second: Vec<usize>) -> Result<Self> {
        if first.len() != second.len() || first.is_empty() {
            return Err(Error::Model(format!(
                "pattern components must share a positive length (got {} and {})",
                first.len(),
                second.len()
            )));
        }
        Ok(Pattern { first, second })
    }

    pub fn from_joint(modes: &ModeSet, joint: &[usize]) -> Self {
        let (first, second) = joint.iter().map(|&u| modes.split_joint(u)).unzip();
        Pattern { first, second }
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn joint(&self, modes: &ModeSet) -> Vec<usize> {
        self.first
            .iter()
            .zip(&self.second)
            .map(|(&a, &b)| modes.joint_index(a, b))
            .collect()
    }

    pub fn component(&self, c: usize) -> &[usize] {
        if c == 0 {
            &self.first
        } else {
            &self.second
        }
    }

    pub fn validate(&self, modes: &ModeSet) -> Result<()> {
        if self.first.len() != self.second.len() || self.first.is_empty() {
            return Err(Error::Model(
                "pattern components must share a positive length".into(),
            ));
        }
        for (c, seq) in [&self.first, &self.second].into_iter().enumerate() {
            if let Some(&bad) = seq.iter().find(|&&i| i >= modes.component_count(c)) {
                return Err(Error::Model(format!(
                    "mode index {bad} out of range for component {}",
                    c + 1
                )));
            }
        }
        Ok(())
    }
}

/// Lexicographic enumeration of mode sequences, shorter lengths first.
pub struct PatternIter {
    choices: Vec<usize>,
    max_len: usize,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for PatternIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done || self.choices.is_empty() {
            return None;
        }
        let item: Vec<usize> = self.digits.iter().map(|&d| self.choices[d]).collect();
        // odometer step; on overflow move to the next length
        let base = self.choices.len();
        let mut pos = self.digits.len();
        loop {
            if pos == 0 {
                if self.digits.len() == self.max_len {
                    self.done = true;
                } else {
                    self.digits = vec![0; self.digits.len() + 1];
                }
                break;
            }
            pos -= 1;
            self.digits[pos] += 1;
            if self.digits[pos] < base {
                break;
            }
            self.digits[pos] = 0;
        }
        Some(item)
    }
}

/// Every constraint-satisfying sequence with length in `min_len..=max_len`.
///
/// Joint scope yields canonical joint indices; component scope yields
/// component-local indices.
pub fn enumerate_patterns(
    modes: &ModeSet,
    scope: Scope,
    min_len: usize,
    max_len: usize,
) -> PatternIter {
    let min_len = min_len.max(1);
    PatternIter {
        choices: modes.choices(scope),
        max_len,
        digits: vec![0; min_len],
        done: min_len > max_len,
    }
}

/// Per-component separability: how far the component's rows depend on the
/// other component's mode. Zero means the structural guarantee holds exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Separability {
    pub defect: [f64; 2],
}

impl Separability {
    pub fn is_exact(&self) -> bool {
        self.defect == [0.0, 0.0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchedSystem {
    n: usize,
    split: (usize, usize),
    modes: ModeSet,
    /// One map per joint mode, canonical order.
    dynamics: Vec<AffineMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset_sensitivity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau_s: Option<f64>,
    #[serde(skip)]
    separability: Separability,
}

impl SwitchedSystem {
    pub fn new(split: (usize, usize), modes: ModeSet, dynamics: Vec<AffineMap>) -> Result<Self> {
        let n = split.0 + split.1;
        if split.0 == 0 {
            return Err(Error::Model(
                "the first component needs at least one state".into(),
            ));
        }
        if dynamics.len() != modes.joint_count() {
            return Err(Error::dim(
                "dynamics per joint mode",
                modes.joint_count(),
                dynamics.len(),
            ));
        }
        if split.1 == 0 && modes.component_count(1) != 1 {
            return Err(Error::Model(
                "a component without states cannot carry modes".into(),
            ));
        }
        for m in &dynamics {
            if m.rows() != n || m.cols() != n {
                return Err(Error::dim("mode map size", n, m.rows().max(m.cols())));
            }
            if !m.matrix.is_finite() || m.offset.iter().any(|v| !v.is_finite()) {
                return Err(Error::Model("non-finite entry in mode dynamics".into()));
            }
        }
        let mut sys = SwitchedSystem {
            n,
            split,
            modes,
            dynamics,
            offset_sensitivity: None,
            tau_s: None,
            separability: Separability::default(),
        };
        sys.separability = sys.measure_separability();
        Ok(sys)
    }

    pub fn with_offset_sensitivity(mut self, e: Vec<f64>) -> Result<Self> {
        if e.len() != self.n {
            return Err(Error::dim("offset sensitivity", self.n, e.len()));
        }
        self.offset_sensitivity = Some(e);
        Ok(self)
    }

    pub fn with_sampling_period(mut self, tau_s: f64) -> Self {
        self.tau_s = Some(tau_s);
        self
    }

    /// Re-establishes derived data after deserialization.
    pub fn revalidate(self) -> Result<Self> {
        let SwitchedSystem {
            split,
            modes,
            dynamics,
            offset_sensitivity,
            tau_s,
            ..
        } = self;
        let mut sys = SwitchedSystem::new(split, modes, dynamics)?;
        if let Some(e) = offset_sensitivity {
            sys = sys.with_offset_sensitivity(e)?;
        }
        sys.tau_s = tau_s;
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn split(&self) -> (usize, usize) {
        self.split
    }

    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    pub fn dynamics(&self, u: usize) -> &AffineMap {
        &self.dynamics[u]
    }

    pub fn offset_sensitivity(&self) -> Option<&[f64]> {
        self.offset_sensitivity.as_deref()
    }

    pub fn sampling_period(&self) -> Option<f64> {
        self.tau_s
    }

    pub fn separability(&self) -> Separability {
        self.separability
    }

    /// State index range of a component.
    pub fn component_range(&self, c: usize) -> std::ops::Range<usize> {
        if c == 0 {
            0..self.split.0
        } else {
            self.split.0..self.n
        }
    }

    fn measure_separability(&self) -> Separability {
        let mut defect = [0.0f64; 2];
        let (n1c, n2c) = (self.modes.component_count(0), self.modes.component_count(1));
        for c in 0..2 {
            let rows = self.component_range(c);
            let (own, other) = if c == 0 { (n1c, n2c) } else { (n2c, n1c) };
            for i in 0..own {
                let joint = |j: usize| {
                    if c == 0 {
                        self.modes.joint_index(i, j)
                    } else {
                        self.modes.joint_index(j, i)
                    }
                };
                let reference = &self.dynamics[joint(0)];
                for j in 1..other {
                    let m = &self.dynamics[joint(j)];
                    for r in rows.clone() {
                        let d_off = (m.offset[r] - reference.offset[r]).abs();
                        let d_row = m
                            .matrix
                            .row(r)
                            .iter()
                            .zip(reference.matrix.row(r))
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        defect[c] = defect[c].max(d_off).max(d_row);
                    }
                }
            }
        }
        Separability { defect }
    }

    /// Row block of component `c` for each distinct behaviour under local
    /// mode `local`: one map when the component is exactly separable, several
    /// (deduplicated) otherwise.
    pub fn component_maps(&self, c: usize, local: usize) -> Vec<AffineMap> {
        let rows = self.component_range(c);
        let other = self.modes.component_count(1 - c);
        let mut out: Vec<AffineMap> = Vec::new();
        for j in 0..other {
            let u = if c == 0 {
                self.modes.joint_index(local, j)
            } else {
                self.modes.joint_index(j, local)
            };
            if !self.modes.is_joint_allowed(u) {
                continue;
            }
            let block = self.dynamics[u].row_block(rows.start, rows.end);
            if !out.contains(&block) {
                out.push(block);
            }
        }
        out
    }

    /// One step of the closed loop under joint mode `u`.
    pub fn step(&self, x: &[f64], u: usize) -> Vec<f64> {
        self.dynamics[u].apply(x)
    }
}

/// Composition of the per-step joint-mode maps; step 1 is applied first.
pub fn pattern_map(sys: &SwitchedSystem, pat: &Pattern) -> Result<AffineMap> {
    pat.validate(sys.modes())?;
    let joint = pat.joint(sys.modes());
    joint_sequence_map(sys, &joint)
}

pub(crate) fn joint_sequence_map(sys: &SwitchedSystem, joint: &[usize]) -> Result<AffineMap> {
    let mut acc = sys.dynamics(joint[0]).clone();
    for &u in &joint[1..] {
        acc = compose(sys.dynamics(u), &acc)?;
    }
    Ok(acc)
}

/// Continuous-time per-mode dynamics `ẋ = A_u x + c_u`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousSpec {
    pub drift: Vec<Matrix>,
    pub offset: Vec<Vec<f64>>,
    pub tau_s: f64,
}

/// Exact zero-order discretization of every mode over one sampling period.
///
/// Uses `exp(τ·[[A, c], [0, 0]])`: its top-left block is `e^{Aτ}` and its
/// last column holds `∫₀^τ e^{As} ds · c`, with no inversion of `A` needed.
pub fn discretize(spec: &ContinuousSpec) -> Result<Vec<AffineMap>> {
    if !(spec.tau_s > 0.0) || !spec.tau_s.is_finite() {
        return Err(Error::Model(format!(
            "sampling period must be positive, got {}",
            spec.tau_s
        )));
    }
    if spec.drift.len() != spec.offset.len() {
        return Err(Error::dim(
            "continuous modes",
            spec.drift.len(),
            spec.offset.len(),
        ));
    }
    spec.drift
        .iter()
        .zip(&spec.offset)
        .map(|(a, c)| discretize_mode(a, c, spec.tau_s))
        .collect()
}

fn discretize_mode(a: &Matrix, c: &[f64], tau: f64) -> Result<AffineMap> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::dim("drift matrix", n, a.cols()));
    }
    if c.len() != n {
        return Err(Error::dim("drift offset", n, c.len()));
    }
    if !a.is_finite() || c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model(
            "non-finite entry in continuous dynamics".into(),
        ));
    }
    let mut aug = Matrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)] * tau;
        }
        aug[(i, n)] = c[i] * tau;
    }
    let e = expm(&aug);
    let matrix = e.block(0, n, 0, n);
    let offset = (0..n).map(|i| e[(i, n)]).collect();
    AffineMap::new(matrix, offset)
}
