// SPDX-License-Identifier: Apache-2.0

//! Shared helpers: random heating systems and sampled certificate checks.

#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use switchsynth::artifact::{Artifact, Controller};
use switchsynth::config::Config;
use switchsynth::geometry::Rect;
use switchsynth::runtime::{simulate, Schedule};
use switchsynth::synth::centralized::Ring;
use switchsynth::synth::distributed::{approx_boxes_at, DistRing};
use switchsynth::system::SwitchedSystem;

pub fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

pub fn bundled(name: &str) -> Config {
    Config::load(&configs_dir().join(format!("{name}.json"))).expect("bundled config loads")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sample_in(rng: &mut impl Rng, r: &Rect) -> Vec<f64> {
    r.intervals()
        .iter()
        .map(|iv| {
            if iv.width() > 0.0 {
                rng.gen_range(iv.lo..=iv.hi)
            } else {
                iv.lo
            }
        })
        .collect()
}

/// Shape of a random heating system: rooms in a chain, one heater per room,
/// outside temperature 10.
pub struct HeatingSpec {
    pub split: (usize, usize),
    /// Neighbour coupling inside a component, upper bound.
    pub coupling_in: f64,
    /// Coupling across the component boundary, upper bound.
    pub coupling_out: f64,
    /// Fraction of a heater's output leaking into the neighbouring room of
    /// the other component (makes the row blocks mode-dependent).
    pub leak: f64,
    pub max_active: Option<u32>,
}

/// Discrete-time heating config with random but stable dynamics.
pub fn heating_config(rng: &mut impl Rng, spec: &HeatingSpec, synthesis: Value) -> Config {
    let (n1, n2) = spec.split;
    let n = n1 + n2;
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = rng.gen_range(0.9..0.97);
    }
    for i in 0..n.saturating_sub(1) {
        let across = i + 1 == n1;
        let bound = if across {
            spec.coupling_out
        } else {
            spec.coupling_in
        };
        let k = if bound > 0.0 {
            rng.gen_range(0.0..bound)
        } else {
            0.0
        };
        a[i][i + 1] = k;
        a[i + 1][i] = k;
    }
    let c: Vec<f64> = a
        .iter()
        .map(|row| 10.0 * (1.0 - row.iter().sum::<f64>()))
        .collect();
    let actuators: Vec<Value> = (0..n)
        .map(|i| {
            let on_eq = rng.gen_range(28.0..36.0);
            let h = (on_eq - 10.0) * (1.0 - a[i][i]);
            let mut dc = vec![0.0; n];
            dc[i] = h;
            if spec.leak > 0.0 {
                if i + 1 == n1 && n2 > 0 {
                    dc[i + 1] = spec.leak * h;
                } else if i == n1 && n1 > 0 {
                    dc[i - 1] = spec.leak * h;
                }
            }
            json!({ "A": vec![vec![0.0; n]; n], "c": dc })
        })
        .collect();
    let mut split = vec![n1];
    let mut modes = vec![json!({ "actuators": n1 })];
    if n2 > 0 {
        split.push(n2);
        modes.push(json!({ "actuators": n2 }));
    }
    let mut constraints = json!({});
    if let Some(m) = spec.max_active {
        constraints = json!({ "per_component_max_active": vec![m; split.len()] });
    }
    let cfg = json!({
        "system": { "discrete": { "A": a, "c": c, "actuators": actuators } },
        "split": split,
        "modes": modes,
        "constraints": constraints,
        "R": vec![[18.0, 22.0]; n],
        "synthesis": synthesis,
    });
    Config::from_json(&cfg.to_string()).expect("generated config is valid")
}

/// Replays one centralized ring from `x`: the located tile's pattern must
/// end in the ring's base, with every intermediate state inside `margin`.
pub fn check_centralized_ring(
    sys: &SwitchedSystem,
    ring: &Ring,
    margin: Option<&Rect>,
    x: &[f64],
) -> Result<(), String> {
    let tile = ring
        .tiling
        .locate_extended(x, ring.a, ring.extension)
        .map_err(|e| format!("ring {}: {e}", ring.index))?;
    let control = ring
        .control(tile)
        .ok_or_else(|| format!("ring {}: no entry for tile {tile}", ring.index))?;
    let joint = control.pattern.joint(sys.modes());
    let mut y = x.to_vec();
    for (j, &u) in joint.iter().enumerate() {
        y = sys.step(&y, u);
        if j + 1 < joint.len() {
            if let Some(m) = margin {
                if !m.contains_point(&y) {
                    return Err(format!(
                        "ring {}: prefix {} of {x:?} left the margin at {y:?}",
                        ring.index,
                        j + 1
                    ));
                }
            }
        }
    }
    if ring.base.contains_point(&y) {
        Ok(())
    } else {
        Err(format!(
            "ring {}: {x:?} ended at {y:?}, outside the base",
            ring.index
        ))
    }
}

/// Replays one distributed ring for `ℓ` steps from `x`, each component
/// re-reading only its own state every `k_c` steps. Checks that every
/// component state lies in its approximation boxes at `A` (while the other
/// component is within its margin), that all states stay in the ε-margin
/// and that the run ends in the ring's base.
pub fn check_distributed_ring(
    sys: &SwitchedSystem,
    ring: &DistRing,
    x: &[f64],
) -> Result<(), String> {
    let frame = ring.frame();
    let ranges = [sys.component_range(0), sys.component_range(1)];
    let bases: Vec<Rect> = ring.components.iter().map(|c| c.base.clone()).collect();
    let margin_c: Vec<Rect> = bases
        .iter()
        .map(|b| {
            frame
                .extension
                .extend_rect(b, ring.a)
                .inflate(frame.epsilon)
        })
        .collect();
    let mut y = x.to_vec();
    let mut boxes: [Vec<Rect>; 2] = [Vec::new(), Vec::new()];
    let mut local: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for s in 0..ring.ell {
        for c in 0..2 {
            let part = &ring.components[c];
            if s % part.k == 0 {
                let xc = &y[ranges[c].clone()];
                let tile = part
                    .tiling
                    .locate_extended(xc, ring.a, ring.extension)
                    .map_err(|e| {
                        format!("ring {} component {}: step {s}: {e}", ring.index, c + 1)
                    })?;
                let entry = part.control(tile).ok_or_else(|| {
                    format!(
                        "ring {} component {}: no entry for tile {tile}",
                        ring.index,
                        c + 1
                    )
                })?;
                local[c] = entry.pattern.clone();
                let start = part.tiling.extend_tile(tile, ring.a, ring.extension);
                let other = frame
                    .extension
                    .extend_rect(&bases[1 - c], ring.a)
                    .inflate(frame.epsilon);
                boxes[c] = approx_boxes_at(sys, c, &start, &other, &local[c], frame.coupling)
                    .map_err(|e| e.to_string())?;
            }
        }
        let u = sys.modes().joint_index(
            local[0][s % ring.components[0].k],
            local[1][s % ring.components[1].k],
        );
        y = sys.step(&y, u);
        for c in 0..2 {
            let part = &ring.components[c];
            let xc = &y[ranges[c].clone()];
            let other_in = margin_c[1 - c].contains_point(&y[ranges[1 - c].clone()]);
            let j = s % part.k + 1;
            if other_in && !boxes[c][j].contains_point(xc) {
                return Err(format!(
                    "ring {} component {}: {x:?} step {} state {xc:?} outside approximation box {j}",
                    ring.index,
                    c + 1,
                    s + 1
                ));
            }
            if s + 1 < ring.ell && !margin_c[c].contains_point(xc) {
                return Err(format!(
                    "ring {} component {}: {x:?} left the margin at step {}",
                    ring.index,
                    c + 1,
                    s + 1
                ));
            }
        }
    }
    if ring.base().contains_point(&y) {
        Ok(())
    } else {
        Err(format!(
            "ring {}: {x:?} ended at {y:?}, outside the base",
            ring.index
        ))
    }
}

/// Sampled per-ring check over `samples` points of each ring's extended box.
/// Returns the number of violations and the first message.
pub fn sample_rings(art: &Artifact, samples: usize, seed: u64) -> (usize, Option<String>) {
    let mut r = rng(seed);
    let sys = &art.system;
    let mut bad = 0;
    let mut first = None;
    let mut note = |res: Result<(), String>| {
        if let Err(m) = res {
            bad += 1;
            first.get_or_insert(m);
        }
    };
    match &art.controller {
        Controller::Centralized { stability, rings } => {
            for ring in rings {
                for _ in 0..samples {
                    note(check_centralized_ring(
                        sys,
                        ring,
                        None,
                        &sample_in(&mut r, &ring.extended),
                    ));
                }
            }
            if let Some(s) = stability {
                let margin = s.base.inflate(s.epsilon.unwrap_or(0.0));
                for _ in 0..samples {
                    note(check_centralized_ring(
                        sys,
                        s,
                        Some(&margin),
                        &sample_in(&mut r, &s.base),
                    ));
                }
            }
        }
        Controller::Distributed { stability, rings } => {
            for ring in rings.iter().chain(std::iter::once(stability)) {
                let ext = ring.extended();
                for _ in 0..samples {
                    note(check_distributed_ring(sys, ring, &sample_in(&mut r, &ext)));
                }
            }
        }
    }
    (bad, first)
}

/// Step budget for reaching the objective from anywhere in `S`.
pub fn capture_budget(art: &Artifact) -> usize {
    match &art.controller {
        Controller::Centralized { rings, .. } => rings.iter().map(Ring::longest_pattern).sum(),
        Controller::Distributed { rings, .. } => rings.iter().map(|r| r.ell).sum(),
    }
}

/// Closed-loop simulations from random points of `S`: the objective is
/// reached within the capture budget, and afterwards centralized runs are
/// back in it at every macro boundary while distributed runs (and
/// centralized ones with a stability margin) stay in the ε-margin.
pub fn sample_closed_loop(
    art: &Artifact,
    samples: usize,
    extra: usize,
    seed: u64,
) -> (usize, Option<String>) {
    let mut r = rng(seed);
    let s_box = art.outer_box();
    let budget = capture_budget(art);
    let eps = match &art.controller {
        Controller::Centralized { stability, .. } => stability.as_ref().and_then(|s| s.epsilon),
        Controller::Distributed { stability, .. } => Some(stability.epsilon),
    };
    let mut bad = 0;
    let mut first = None;
    for _ in 0..samples {
        let x0 = sample_in(&mut r, &s_box);
        let res = simulate(art, &x0, budget + extra, &Schedule::default())
            .map_err(|e| e.to_string())
            .and_then(|traj| {
                post_capture(art, &traj, budget, eps).map_err(|m| format!("x0 = {x0:?}: {m}"))
            });
        if let Err(m) = res {
            bad += 1;
            first.get_or_insert(m);
        }
    }
    (bad, first)
}

pub fn post_capture(
    art: &Artifact,
    traj: &switchsynth::runtime::Trajectory,
    budget: usize,
    eps: Option<f64>,
) -> Result<(), String> {
    if traj.outcome != switchsynth::runtime::Outcome::Completed {
        return Err(format!("{:?}", traj.outcome));
    }
    let centralized = matches!(art.controller, Controller::Centralized { .. });
    // centralized: first macro boundary in R; distributed: hand-over to the
    // stability ring (outer rings only certify their own margins)
    let captured = |s: &&switchsynth::runtime::Step| {
        if centralized {
            s.phase == 0 && art.objective.contains_point(&s.x)
        } else {
            s.ring == 0 && art.objective.contains_point(&s.x)
        }
    };
    let entry = traj
        .steps
        .iter()
        .find(captured)
        .map(|s| s.t)
        .ok_or("never captured")?;
    if entry > budget {
        return Err(format!("captured at step {entry}, budget {budget}"));
    }
    let margin = eps.map(|e| art.objective.inflate(e));
    for s in &traj.steps[entry..] {
        if centralized && s.phase == 0 && s.mode.is_some() && !art.objective.contains_point(&s.x) {
            return Err(format!(
                "macro boundary at step {} outside R: {:?}",
                s.t, s.x
            ));
        }
        if let Some(m) = &margin {
            if !m.contains_point(&s.x) {
                return Err(format!("step {} outside R + eps: {:?}", s.t, s.x));
            }
        }
    }
    Ok(())
}
