// SPDX-License-Identifier: Apache-2.0

//! Brute-force first-ring extension: every pattern up to length K, an
//! a-grid scan refined by bisection, and vertex images instead of interval
//! arithmetic. Inclusion is monotone in a because extended tiles nest.

use rand::Rng;
use serde_json::json;

use switchsynth::config::Config;
use switchsynth::geometry::Rect;
use switchsynth::synth::SynthOptions;
use switchsynth::system::{Scope, SwitchedSystem};

use super::{bundled, heating_config, rng, HeatingSpec};

pub fn vertices(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let n = lo.len();
    (0..1usize << n)
        .map(|m| {
            (0..n)
                .map(|j| if m >> j & 1 == 1 { hi[j] } else { lo[j] })
                .collect()
        })
        .collect()
}

fn sequences(choices: &[usize], max_len: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|s| {
                choices.iter().map(move |&u| {
                    let mut t = s.clone();
                    t.push(u);
                    t
                })
            })
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

/// A box as (lo, hi, lower-contact flags).
struct OracleTile {
    lo: Vec<f64>,
    hi: Vec<f64>,
    contact: Vec<bool>,
}

impl OracleTile {
    fn extended(&self, a: f64) -> (Vec<f64>, Vec<f64>) {
        let lo = self
            .lo
            .iter()
            .zip(&self.contact)
            .map(|(&l, &c)| if c { l - a } else { l })
            .collect();
        (lo, self.hi.clone())
    }
}

/// Images of all vertices of the extended tile stay in `target`.
fn maps_into(
    sys: &SwitchedSystem,
    tile: &OracleTile,
    seq: &[usize],
    a: f64,
    target: &Rect,
) -> bool {
    let (lo, hi) = tile.extended(a);
    vertices(&lo, &hi).into_iter().all(|v| {
        let end = seq.iter().fold(v, |x, &u| sys.step(&x, u));
        target.contains_point(&end)
    })
}

const A_MAX: f64 = 200.0;
const GRID: f64 = 0.05;

/// sup a for one pattern: grid scan, then bisection inside the last cell.
fn scan_a(sys: &SwitchedSystem, tile: &OracleTile, seq: &[usize], target: &Rect) -> Option<f64> {
    if !maps_into(sys, tile, seq, 0.0, target) {
        return None;
    }
    let mut g = 0.0;
    while g + GRID <= A_MAX && maps_into(sys, tile, seq, g + GRID, target) {
        g += GRID;
    }
    if g + GRID > A_MAX {
        return Some(f64::INFINITY);
    }
    let (mut lo, mut hi) = (g, g + GRID);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if maps_into(sys, tile, seq, mid, target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

fn best_a(sys: &SwitchedSystem, tile: &OracleTile, k: usize, target: &Rect) -> Option<f64> {
    let choices = sys.modes().choices(Scope::Joint);
    sequences(&choices, k)
        .iter()
        .filter_map(|s| scan_a(sys, tile, s, target))
        .fold(None, |acc: Option<f64>, a| {
            Some(acc.map_or(a, |b| b.max(a)))
        })
}

/// First-ring extension by brute force for depth budget 0 or 1. `None`
/// when some tile has no admissible pattern.
pub fn oracle_first_ring(sys: &SwitchedSystem, base: &Rect, k: usize, depth: u32) -> Option<f64> {
    let root = OracleTile {
        lo: base.lo(),
        hi: base.hi(),
        contact: vec![true; base.dims()],
    };
    if let Some(a) = best_a(sys, &root, k, base) {
        return Some(a);
    }
    if depth == 0 {
        return None;
    }
    let n = base.dims();
    let mid: Vec<f64> = base.intervals().iter().map(|iv| iv.mid()).collect();
    let mut worst = f64::INFINITY;
    for m in 0..1usize << n {
        let upper = |j: usize| m >> j & 1 == 1;
        let child = OracleTile {
            lo: (0..n)
                .map(|j| if upper(j) { mid[j] } else { base.lo()[j] })
                .collect(),
            hi: (0..n)
                .map(|j| if upper(j) { base.hi()[j] } else { mid[j] })
                .collect(),
            contact: (0..n).map(|j| !upper(j)).collect(),
        };
        worst = worst.min(best_a(sys, &child, k, base)?);
    }
    Some(worst)
}

pub fn toy(k: usize) -> (SwitchedSystem, Rect, SynthOptions) {
    let cfg = bundled("toy1d");
    let mut opts = cfg.synth_options();
    opts.max_pattern_len = k;
    (cfg.build_system().unwrap(), cfg.objective().unwrap(), opts)
}

/// Small systems: n ≤ 2, at most 4 joint modes, K ≤ 3, D ≤ 1.
pub fn corpus() -> Vec<(String, SwitchedSystem, Rect, usize, u32)> {
    let mut out = Vec::new();
    let mut r = rng(8);
    for k in 1..=3 {
        for d in 0..=1 {
            let (sys, obj, _) = toy(k);
            out.push((format!("toy K={k} D={d}"), sys, obj, k, d));
        }
    }
    // scalar systems with three modes
    for i in 0..6 {
        let maps: Vec<_> = (0..3)
            .map(|_| {
                let m: f64 = r.gen_range(0.2..0.9);
                let eq: f64 = r.gen_range(0.0..40.0);
                json!({ "A": [[m]], "c": [eq * (1.0 - m)] })
            })
            .collect();
        let cfg = json!({
            "system": { "discrete": { "maps": maps } },
            "split": [1],
            "modes": [["lo", "mid", "hi"]],
            "R": [[18.0, 22.0]],
            "synthesis": { "K": 1 + i % 3, "D": (i / 3) as u32 }
        });
        let cfg = Config::from_json(&cfg.to_string()).unwrap();
        out.push((
            format!("scalar #{i}"),
            cfg.build_system().unwrap(),
            cfg.objective().unwrap(),
            cfg.synthesis.K,
            cfg.synthesis.D,
        ));
    }
    // two rooms, one heater each
    for i in 0..8 {
        let k = 1 + i % 3;
        let d = (i % 2) as u32;
        let spec = HeatingSpec {
            split: (1, 1),
            coupling_in: 0.0,
            coupling_out: 0.1,
            leak: 0.0,
            max_active: None,
        };
        let cfg = heating_config(&mut r, &spec, json!({ "K": k, "D": d }));
        out.push((
            format!("two-room #{i} K={k} D={d}"),
            cfg.build_system().unwrap(),
            cfg.objective().unwrap(),
            k,
            d,
        ));
    }
    out
}
