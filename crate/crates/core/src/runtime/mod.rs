// SPDX-License-Identifier: Apache-2.0

//! Closed-loop simulation of synthesized controllers.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{Artifact, Controller};
use crate::config::{parse_json, read_text};
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::synth::centralized::Ring;
use crate::synth::distributed::DistRing;
use crate::system::SwitchedSystem;

pub mod verify;

/// Piecewise-constant exogenous signal `w(t)` over step indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub segments: Vec<Segment>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    /// First step the value applies to.
    pub from: usize,
    pub w: f64,
}

impl Schedule {
    pub fn new(segments: Vec<Segment>) -> Result<Schedule> {
        if segments.windows(2).any(|p| p[0].from >= p[1].from) {
            return Err(Error::config(
                "segments",
                "`from` must be strictly increasing",
            ));
        }
        if segments.iter().any(|s| !s.w.is_finite()) {
            return Err(Error::config("segments", "non-finite value"));
        }
        Ok(Schedule { segments })
    }

    pub fn constant(w: f64) -> Schedule {
        Schedule {
            segments: vec![Segment { from: 0, w }],
        }
    }

    pub fn load(path: &Path) -> Result<Schedule> {
        let s: Schedule = parse_json(&read_text(path)?)?;
        Schedule::new(s.segments)
    }

    /// `w(t)`; zero before the first segment.
    pub fn value(&self, t: usize) -> f64 {
        let i = self.segments.partition_point(|s| s.from <= t);
        if i == 0 {
            0.0
        } else {
            self.segments[i - 1].w
        }
    }

    pub fn scaled(&self, factor: f64) -> Schedule {
        Schedule {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    from: s.from,
                    w: s.w * factor,
                })
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.segments.iter().all(|s| s.w == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: usize,
    pub x: Vec<f64>,
    /// Joint mode applied from `t` to `t+1`; `None` on the last record.
    pub mode: Option<usize>,
    /// Ring in charge (0 = stability ring).
    pub ring: usize,
    /// Position inside the current macro-step.
    pub phase: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    /// The state left every ring at a lookup (only possible under
    /// perturbation or with a corrupted artifact).
    Escaped {
        step: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub outcome: Outcome,
}

impl Trajectory {
    /// First step index at which the state lies in `r`.
    pub fn first_entry(&self, r: &Rect) -> Option<usize> {
        self.steps
            .iter()
            .find(|s| r.contains_point(&s.x))
            .map(|s| s.t)
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.steps.iter().map(|s| s.x.as_slice())
    }

    /// CSV with header `step,time_s,x_1..x_n,mode_label,ring,phase`.
    pub fn write_csv<W: Write>(&self, sys: &SwitchedSystem, out: W) -> Result<()> {
        self.write_csv_rows(sys, out, true)
    }

    /// Like [`Trajectory::write_csv`]; `header = false` appends rows only.
    pub fn write_csv_rows<W: Write>(
        &self,
        sys: &SwitchedSystem,
        out: W,
        header: bool,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = sys.dim();
        let mut header_row = vec!["step".to_string(), "time_s".to_string()];
        header_row.extend((1..=n).map(|i| format!("x_{i}")));
        header_row.extend([
            "mode_label".to_string(),
            "ring".to_string(),
            "phase".to_string(),
        ]);
        if header {
            w.write_record(&header_row).map_err(csv_err)?;
        }
        let tau = sys.sampling_period();
        for s in &self.steps {
            let mut rec = vec![
                s.t.to_string(),
                tau.map_or(String::new(), |tau| num(s.t as f64 * tau)),
            ];
            rec.extend(s.x.iter().map(|&v| num(v)));
            rec.push(s.mode.map_or(String::new(), |u| sys.modes().joint_label(u)));
            rec.push(s.ring.to_string());
            rec.push(s.phase.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

pub(crate) fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv output: {e}"))
}

struct Plant<'a> {
    sys: &'a SwitchedSystem,
    schedule: &'a Schedule,
}

impl Plant<'_> {
    fn new<'a>(sys: &'a SwitchedSystem, schedule: &'a Schedule) -> Result<Plant<'a>> {
        if !schedule.is_zero() && sys.offset_sensitivity().is_none() {
            return Err(Error::config(
                "offset_sensitivity",
                "a schedule needs the system's offset sensitivity",
            ));
        }
        Ok(Plant { sys, schedule })
    }

    fn step(&self, x: &[f64], u: usize, t: usize) -> Vec<f64> {
        let mut next = self.sys.step(x, u);
        let w = self.schedule.value(t);
        if w != 0.0 {
            let e = self.sys.offset_sensitivity().expect("checked");
            next.iter_mut().zip(e).for_each(|(v, e)| *v += e * w);
        }
        next
    }
}

/// Simulates the closed loop for `max_steps` steps from `x0`.
pub fn simulate(
    art: &Artifact,
    x0: &[f64],
    max_steps: usize,
    schedule: &Schedule,
) -> Result<Trajectory> {
    let sys = &art.system;
    if x0.len() != sys.dim() {
        return Err(Error::dim("initial state", sys.dim(), x0.len()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::OutOfDomain { state: x0.to_vec() });
    }
    let plant = Plant::new(sys, schedule)?;
    match &art.controller {
        Controller::Centralized { stability, rings } => simulate_centralized(
            &plant,
            &art.objective,
            stability.as_ref(),
            rings,
            x0,
            max_steps,
        ),
        Controller::Distributed { stability, rings } => {
            simulate_distributed(&plant, &art.objective, stability, rings, x0, max_steps)
        }
    }
}

/// Innermost ring whose extended box holds `x`; the stability ring when `x`
/// is already in the objective.
fn pick_ring<'r>(
    objective: &Rect,
    stability: Option<&'r Ring>,
    rings: &'r [Ring],
    x: &[f64],
) -> Option<&'r Ring> {
    if objective.contains_point(x) {
        if let Some(s) = stability {
            return Some(s);
        }
    }
    rings.iter().find(|r| r.extended.contains_point(x))
}

fn simulate_centralized(
    plant: &Plant<'_>,
    objective: &Rect,
    stability: Option<&Ring>,
    rings: &[Ring],
    x0: &[f64],
    max_steps: usize,
) -> Result<Trajectory> {
    let sys = plant.sys;
    let mut steps = Vec::with_capacity(max_steps + 1);
    let mut x = x0.to_vec();
    let mut t = 0;
    let mut ring_idx = 0;
    while t < max_steps {
        let Some(ring) = pick_ring(objective, stability, rings, &x) else {
            if t == 0 {
                return Err(Error::OutOfDomain { state: x });
            }
            steps.push(Step {
                t,
                x,
                mode: None,
                ring: ring_idx,
                phase: 0,
            });
            return Ok(Trajectory {
                steps,
                outcome: Outcome::Escaped { step: t },
            });
        };
        ring_idx = ring.index;
        let tile = ring.tiling.locate_extended(&x, ring.a, ring.extension)?;
        let control = ring.control(tile).ok_or(Error::TableMiss {
            ring: ring.index,
            tile,
        })?;
        for (phase, u) in control.pattern.joint(sys.modes()).into_iter().enumerate() {
            if t == max_steps {
                break;
            }
            let next = plant.step(&x, u, t);
            steps.push(Step {
                t,
                x,
                mode: Some(u),
                ring: ring.index,
                phase,
            });
            x = next;
            t += 1;
        }
    }
    steps.push(Step {
        t,
        x,
        mode: None,
        ring: ring_idx,
        phase: 0,
    });
    Ok(Trajectory {
        steps,
        outcome: Outcome::Completed,
    })
}

/// Phase schedule: starting from the innermost ring holding `x0`, spend
/// `ℓ^(i)` steps in ring `i`, descend, then loop the stability ring. Each
/// component only reads its own state.
fn simulate_distributed(
    plant: &Plant<'_>,
    objective: &Rect,
    stability: &DistRing,
    rings: &[DistRing],
    x0: &[f64],
    max_steps: usize,
) -> Result<Trajectory> {
    let sys = plant.sys;
    let mut current: Option<usize> = if objective.contains_point(x0) {
        None
    } else {
        Some(
            rings
                .iter()
                .position(|r| r.extended().contains_point(x0))
                .ok_or_else(|| Error::OutOfDomain { state: x0.to_vec() })?,
        )
    };
    let ranges = [sys.component_range(0), sys.component_range(1)];
    let mut steps = Vec::with_capacity(max_steps + 1);
    let mut x = x0.to_vec();
    let mut s = 0;
    let mut local = [Vec::new(), Vec::new()];
    for t in 0..max_steps {
        let ring = current.map_or(stability, |i| &rings[i]);
        if s == ring.ell {
            current = match current {
                Some(0) | None => None,
                Some(i) => Some(i - 1),
            };
            s = 0;
        }
        let ring = current.map_or(stability, |i| &rings[i]);
        let mut u = [0usize; 2];
        for c in 0..2 {
            let part = &ring.components[c];
            if s % part.k == 0 {
                let xc = &x[ranges[c].clone()];
                let Ok(tile) = part.tiling.locate_extended(xc, ring.a, ring.extension) else {
                    steps.push(Step {
                        t,
                        x,
                        mode: None,
                        ring: ring.index,
                        phase: s,
                    });
                    return Ok(Trajectory {
                        steps,
                        outcome: Outcome::Escaped { step: t },
                    });
                };
                let entry = part.control(tile).ok_or(Error::TableMiss {
                    ring: ring.index,
                    tile,
                })?;
                local[c] = entry.pattern.clone();
            }
            u[c] = local[c][s % part.k];
        }
        let joint = sys.modes().joint_index(u[0], u[1]);
        let next = plant.step(&x, joint, t);
        steps.push(Step {
            t,
            x,
            mode: Some(joint),
            ring: ring.index,
            phase: s,
        });
        x = next;
        s += 1;
    }
    let ring = current.map_or(stability, |i| &rings[i]);
    steps.push(Step {
        t: max_steps,
        x,
        mode: None,
        ring: ring.index,
        phase: s,
    });
    Ok(Trajectory {
        steps,
        outcome: Outcome::Completed,
    })
}

/// Ring and tile boxes as CSV rows `kind,ring,component,tile,dim,lo,hi`
/// (`component` is empty for joint boxes).
pub fn write_geometry<W: Write>(art: &Artifact, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "ring", "component", "tile", "dim", "lo", "hi"])
        .map_err(csv_err)?;
    let mut emit = |kind: &str,
                    ring: usize,
                    comp: Option<usize>,
                    tile: Option<usize>,
                    r: &Rect|
     -> Result<()> {
        for (j, iv) in r.intervals().iter().enumerate() {
            w.write_record([
                kind.to_string(),
                ring.to_string(),
                comp.map_or(String::new(), |c| (c + 1).to_string()),
                tile.map_or(String::new(), |t| t.to_string()),
                (j + 1).to_string(),
                num(iv.lo),
                num(iv.hi),
            ])
            .map_err(csv_err)?;
        }
        Ok(())
    };
    emit("objective", 0, None, None, &art.objective)?;
    match &art.controller {
        Controller::Centralized { stability, rings } => {
            for r in stability.iter().chain(rings) {
                emit("extended", r.index, None, None, &r.extended)?;
                for t in r.tiling.tiles() {
                    emit("tile", r.index, None, Some(t), &r.tiling.node(t).rect)?;
                }
            }
        }
        Controller::Distributed { stability, rings } => {
            for r in std::iter::once(stability).chain(rings) {
                emit("extended", r.index, None, None, &r.extended())?;
                for (c, part) in r.components.iter().enumerate() {
                    for t in part.tiling.tiles() {
                        emit("tile", r.index, Some(c), Some(t), &part.tiling.node(t).rect)?;
                    }
                }
            }
        }
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}
