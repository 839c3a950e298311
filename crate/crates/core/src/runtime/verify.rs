// SPDX-License-Identifier: Apache-2.0

//! Independent re-check of every certificate in an artifact.

use std::fmt;
use std::io::Write;

use num_integer::lcm;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::csv_err;
use crate::artifact::{Artifact, Controller};
use crate::error::{Error, Result};
use crate::geometry::{box_inclusion, image_bounds, Rect};
use crate::synth::centralized::Ring;
use crate::synth::distributed::{prop_holds_at, ComponentRing, DistRing};
use crate::system::{joint_sequence_map, SwitchedSystem};
use crate::tiling::Tiling;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Tiling root, leaves and table entries agree.
    Coverage,
    /// Rings nest and extended boxes match their `a`.
    Nesting,
    /// Extended tile maps into the ring base.
    Inclusion,
    /// Intermediate images stay in the objective plus `ε`.
    Margin,
    /// Distributed `Prop(A)` recursion.
    Prop,
    /// Fixed per-component pattern length and `ℓ = lcm(k1, k2)`.
    FixedLength,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub ring: usize,
    pub component: Option<usize>,
    pub tile: Option<usize>,
    pub kind: CheckKind,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["ring", "component", "tile", "kind", "passed", "detail"])
            .map_err(csv_err)?;
        for c in &self.checks {
            let kind = serde_json::to_value(c.kind).expect("kind serializes");
            w.write_record([
                c.ring.to_string(),
                c.component.map_or(String::new(), |c| (c + 1).to_string()),
                c.tile.map_or(String::new(), |t| t.to_string()),
                kind.as_str().unwrap_or_default().to_string(),
                c.passed.to_string(),
                c.detail.clone(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let failed = self.failures().count();
        writeln!(f, "{} checks, {} failed", self.checks.len(), failed)?;
        for c in self.failures() {
            write!(f, "FAIL ring {} ", c.ring)?;
            if let Some(comp) = c.component {
                write!(f, "component {} ", comp + 1)?;
            }
            if let Some(t) = c.tile {
                write!(f, "tile {t} ")?;
            }
            writeln!(f, "{:?}: {}", c.kind, c.detail)?;
        }
        Ok(())
    }
}

fn check(
    ring: usize,
    component: Option<usize>,
    tile: Option<usize>,
    kind: CheckKind,
    result: Result<(), String>,
) -> Check {
    let (passed, detail) = match result {
        Ok(()) => (true, String::new()),
        Err(d) => (false, d),
    };
    Check {
        ring,
        component,
        tile,
        kind,
        passed,
        detail,
    }
}

fn coverage<T>(
    tiling: &Tiling,
    base: &Rect,
    entries: &[T],
    tile_of: impl Fn(&T) -> usize,
) -> Result<(), String> {
    if tiling.root() != base {
        return Err("tiling root differs from the ring base".into());
    }
    let tiles: Vec<usize> = tiling.tiles().collect();
    let mut listed: Vec<usize> = entries.iter().map(tile_of).collect();
    listed.sort_unstable();
    if listed != tiles {
        return Err(format!(
            "table covers tiles {listed:?}, tiling has leaves {tiles:?}"
        ));
    }
    Ok(())
}

/// Re-checks all certificates of `art`.
pub fn verify_artifact(art: &Artifact) -> Report {
    let mut checks = Vec::new();
    match &art.controller {
        Controller::Centralized { stability, rings } => {
            if let Some(s) = stability {
                checks.push(check(
                    0,
                    None,
                    None,
                    CheckKind::Nesting,
                    nest_stability(s.index, &s.base, s.a, &art.objective),
                ));
                checks.extend(centralized_ring(&art.system, s, &art.objective));
            }
            let mut prev = art.objective.clone();
            for r in rings {
                let nesting = if r.base != prev {
                    Err("base differs from the previous extended ring".to_string())
                } else if !(r.a >= 0.0) || r.extension.extend_rect(&r.base, r.a) != r.extended {
                    Err("extended box does not match base and a".to_string())
                } else {
                    Ok(())
                };
                checks.push(check(r.index, None, None, CheckKind::Nesting, nesting));
                checks.extend(centralized_ring(&art.system, r, &art.objective));
                prev = r.extended.clone();
            }
        }
        Controller::Distributed { stability, rings } => {
            checks.push(check(
                0,
                None,
                None,
                CheckKind::Nesting,
                nest_stability(
                    stability.index,
                    &stability.base(),
                    stability.a,
                    &art.objective,
                ),
            ));
            checks.extend(distributed_ring(&art.system, stability));
            let mut prev = art.objective.clone();
            for r in rings {
                let nesting = if r.base() != prev {
                    Err("component bases differ from the previous extended ring".to_string())
                } else if !(r.a >= 0.0) {
                    Err("negative extension".to_string())
                } else {
                    Ok(())
                };
                checks.push(check(r.index, None, None, CheckKind::Nesting, nesting));
                checks.extend(distributed_ring(&art.system, r));
                prev = r.extended();
            }
        }
    }
    Report { checks }
}

fn nest_stability(index: usize, base: &Rect, a: f64, objective: &Rect) -> Result<(), String> {
    if index != 0 || a != 0.0 {
        Err("stability ring must have index 0 and a = 0".into())
    } else if base != objective {
        Err("stability ring is not built on the objective".into())
    } else {
        Ok(())
    }
}

fn centralized_ring(sys: &SwitchedSystem, ring: &Ring, objective: &Rect) -> Vec<Check> {
    let mut out = vec![check(
        ring.index,
        None,
        None,
        CheckKind::Coverage,
        coverage(&ring.tiling, &ring.base, &ring.table, |c| c.tile),
    )];
    let margin = ring.epsilon.map(|e| objective.inflate(e));
    let per_tile: Vec<Vec<Check>> = ring
        .table
        .par_iter()
        .map(|entry| {
            let mut v = Vec::new();
            let tile = Some(entry.tile);
            let joint = match (entry.pattern.validate(sys.modes()), entry.pattern.len()) {
                (Err(e), _) => {
                    v.push(check(
                        ring.index,
                        None,
                        tile,
                        CheckKind::Inclusion,
                        Err(e.to_string()),
                    ));
                    return v;
                }
                (Ok(()), len) if len > ring.max_pattern_len => {
                    v.push(check(
                        ring.index,
                        None,
                        tile,
                        CheckKind::Inclusion,
                        Err(format!("pattern length {len} exceeds K")),
                    ));
                    return v;
                }
                _ => entry.pattern.joint(sys.modes()),
            };
            if entry.tile >= ring.tiling.nodes().len() {
                v.push(check(
                    ring.index,
                    None,
                    tile,
                    CheckKind::Inclusion,
                    Err("unknown tile".into()),
                ));
                return v;
            }
            let ext = ring.tiling.extend_tile(entry.tile, ring.a, ring.extension);
            let image = |len: usize| {
                joint_sequence_map(sys, &joint[..len]).and_then(|m| image_bounds(&m, &ext))
            };
            let inclusion = match image(joint.len()) {
                Ok(img) if box_inclusion(&img, &ring.base, 0.0).unwrap_or(false) => Ok(()),
                Ok(img) => Err(format!("image {:?} not in base", img.intervals())),
                Err(e) => Err(e.to_string()),
            };
            v.push(check(
                ring.index,
                None,
                tile,
                CheckKind::Inclusion,
                inclusion,
            ));
            if let Some(m) = &margin {
                let res = (1..joint.len()).try_for_each(|len| match image(len) {
                    Ok(img) if box_inclusion(&img, m, 0.0).unwrap_or(false) => Ok(()),
                    Ok(_) => Err(format!("prefix of length {len} leaves the ε margin")),
                    Err(e) => Err(e.to_string()),
                });
                v.push(check(ring.index, None, tile, CheckKind::Margin, res));
            }
            v
        })
        .collect();
    out.extend(per_tile.into_iter().flatten());
    out
}

fn distributed_ring(sys: &SwitchedSystem, ring: &DistRing) -> Vec<Check> {
    let mut out = Vec::new();
    let ks = [ring.components[0].k, ring.components[1].k];
    let period = if ks.contains(&0) {
        Err("zero pattern length".to_string())
    } else if ring.ell != lcm(ks[0], ks[1]) {
        Err(format!(
            "ℓ = {} but lcm(k1, k2) = {}",
            ring.ell,
            lcm(ks[0], ks[1])
        ))
    } else if ring.components.iter().any(|p| p.alpha * p.k != ring.ell) {
        Err("α·k differs from ℓ".to_string())
    } else {
        Ok(())
    };
    out.push(check(
        ring.index,
        None,
        None,
        CheckKind::FixedLength,
        period,
    ));
    for (c, part) in ring.components.iter().enumerate() {
        out.extend(component_checks(sys, ring, c, part));
    }
    out
}

fn component_checks(
    sys: &SwitchedSystem,
    ring: &DistRing,
    c: usize,
    part: &ComponentRing,
) -> Vec<Check> {
    let mut out = vec![check(
        ring.index,
        Some(c),
        None,
        CheckKind::Coverage,
        coverage(&part.tiling, &part.base, &part.table, |e| e.tile),
    )];
    let fixed = if part.k > ring.max_pattern_len {
        Err(format!("k = {} exceeds K", part.k))
    } else if let Some(e) = part.table.iter().find(|e| e.pattern.len() != part.k) {
        Err(format!(
            "tile {} has a pattern of length {}",
            e.tile,
            e.pattern.len()
        ))
    } else if ring.a > part.a {
        Err(format!(
            "A = {} exceeds the component optimum {}",
            ring.a, part.a
        ))
    } else {
        Ok(())
    };
    out.push(check(
        ring.index,
        Some(c),
        None,
        CheckKind::FixedLength,
        fixed,
    ));
    let other = &ring.components[1 - c].base;
    let count = sys.modes().component_count(c);
    let per_tile: Vec<Check> = part
        .table
        .par_iter()
        .map(|e| {
            let res = if e.pattern.iter().any(|&u| u >= count) {
                Err("mode index out of range".to_string())
            } else if e.tile >= part.tiling.nodes().len() {
                Err("unknown tile".to_string())
            } else {
                match prop_holds_at(
                    sys,
                    c,
                    &part.tiling,
                    e.tile,
                    other,
                    &e.pattern,
                    ring.a,
                    ring.frame(),
                    0.0,
                ) {
                    Ok(true) => Ok(()),
                    Ok(false) => Err(format!("Prop fails at a = {}", ring.a)),
                    Err(err) => Err(err.to_string()),
                }
            };
            check(ring.index, Some(c), Some(e.tile), CheckKind::Prop, res)
        })
        .collect();
    out.extend(per_tile);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::synthesize;
    use crate::config::Config;

    fn toy() -> Artifact {
        let text = r#"{
            "system": { "discrete": { "maps": [ { "A": [[0.5]], "c": [0.0] }, { "A": [[0.5]], "c": [10.0] } ] } },
            "split": [1],
            "modes": [ { "actuators": 1 } ],
            "R": [[18.0, 22.0]],
            "synthesis": { "K": 2, "D": 1, "max_rings": 3, "epsilon": 1.0 }
        }"#;
        synthesize(&Config::from_json(text).unwrap()).unwrap()
    }

    #[test]
    fn fresh_artifact_passes() {
        let report = verify_artifact(&toy());
        assert!(report.passed(), "{report}");
        assert!(report.checks.iter().any(|c| c.kind == CheckKind::Margin));
    }

    #[test]
    fn corrupted_pattern_fails_exactly_once() {
        let mut art = toy();
        if let Controller::Centralized { rings, .. } = &mut art.controller {
            rings[1].table[0].pattern.first = vec![0];
        }
        let report = verify_artifact(&art);
        let failed: Vec<_> = report.failures().collect();
        assert_eq!(failed.len(), 1, "{report}");
        assert_eq!((failed[0].ring, failed[0].kind), (2, CheckKind::Inclusion));
    }

    #[test]
    fn inflated_extension_fails() {
        let mut art = toy();
        if let Controller::Centralized { rings, .. } = &mut art.controller {
            rings[0].a += 0.1;
            rings[0].extended = rings[0].extension.extend_rect(&rings[0].base, rings[0].a);
        }
        let report = verify_artifact(&art);
        assert!(
            report
                .failures()
                .any(|c| c.ring == 1 && c.kind == CheckKind::Inclusion),
            "{report}"
        );
    }
}
