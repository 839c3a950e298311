// SPDX-License-Identifier: Apache-2.0

//! Centralized macro-step synthesis.
//!
//! For a base box `B` the synthesis looks for a tiling of `B` and, per
//! tile, a joint pattern of length at most `K` mapping the tile (extended
//! by `a` on its boundary faces) into `B`. The certified extension of the
//! ring is the smallest per-tile optimum. Iterating on `B + a` yields
//! nested capture rings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{certify_extension, float_serde, StopReason, SynthOptions, TilingStrategy};
use crate::error::{Error, Result};
use crate::geometry::{
    box_inclusion, compose, image_bounds, image_bounds_param, AffineMap, ParamRect, Rect,
};
use crate::system::{joint_sequence_map, Pattern, Scope, SwitchedSystem};
use crate::tiling::{ExtensionMode, TileId, Tiling};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileControl {
    pub tile: TileId,
    pub pattern: Pattern,
    /// Best extension this tile alone admits (`+∞` if no face binds).
    #[serde(with = "float_serde")]
    pub a_tile: f64,
    /// Image of the tile extended by the ring's `a` under its pattern.
    pub certificate: Rect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    /// 0 for the stability ring, `i ≥ 1` for `R^(i)`.
    pub index: usize,
    pub base: Rect,
    pub extended: Rect,
    pub a: f64,
    /// Margin on intermediate states (stability rings only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub extension: ExtensionMode,
    pub max_pattern_len: usize,
    pub tiling: Tiling,
    pub table: Vec<TileControl>,
}

impl Ring {
    pub fn control(&self, tile: TileId) -> Option<&TileControl> {
        self.table.iter().find(|c| c.tile == tile)
    }

    pub fn longest_pattern(&self) -> usize {
        self.table
            .iter()
            .map(|c| c.pattern.len())
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Copy)]
struct Candidate<'a> {
    a: f64,
    seq: &'a [usize],
}

/// `(a, length, lexicographic)`-ordered best candidate.
#[derive(Default)]
struct Best {
    a: f64,
    seq: Option<Vec<usize>>,
}

impl Best {
    fn offer(&mut self, c: Candidate<'_>) {
        let better = match &self.seq {
            None => true,
            Some(s) => {
                c.a > self.a || (c.a == self.a && (c.seq.len(), c.seq) < (s.len(), s.as_slice()))
            }
        };
        if better {
            self.a = c.a;
            self.seq = Some(c.seq.to_vec());
        }
    }
}

struct Search<'s> {
    sys: &'s SwitchedSystem,
    choices: Vec<usize>,
    tile: ParamRect,
    target: ParamRect,
    /// `Some(R + ε)` bounds intermediate images (stability synthesis).
    margin: Option<Rect>,
    max_len: usize,
    slack: f64,
}

impl Search<'_> {
    fn run(&self) -> Result<Best> {
        let mut best = Best::default();
        let mut seq = Vec::with_capacity(self.max_len);
        self.descend(None, &mut seq, &mut best)?;
        Ok(best)
    }

    fn descend(
        &self,
        prefix: Option<&AffineMap>,
        seq: &mut Vec<usize>,
        best: &mut Best,
    ) -> Result<()> {
        for &u in &self.choices {
            let map = match prefix {
                None => self.sys.dynamics(u).clone(),
                Some(p) => compose(self.sys.dynamics(u), p)?,
            };
            seq.push(u);
            let image = image_bounds_param(&map, &self.tile)?;
            let mut bound = crate::geometry::ExtensionBound::default();
            bound.require_inclusion(&image, &self.target, self.slack);
            if let Some(a) = bound.value() {
                best.offer(Candidate { a, seq });
            }
            let deeper = seq.len() < self.max_len
                && match &self.margin {
                    None => true,
                    Some(m) => box_inclusion(&image.at(0.0), m, self.slack)?,
                };
            if deeper {
                self.descend(Some(&map), seq, best)?;
            }
            seq.pop();
        }
        Ok(())
    }
}

/// Best pattern for one tile of `tiling`, targeting `target`.
///
/// Enumerates joint patterns up to length `K` and returns the one
/// maximizing the extension `a` for which the extended tile still maps into
/// `target`; ties go to the shorter, then lexicographically smaller pattern.
/// `None` when no pattern maps the unextended tile into the target.
pub fn best_pattern_for_tile(
    sys: &SwitchedSystem,
    tiling: &Tiling,
    tile: TileId,
    target: &Rect,
    opts: &SynthOptions,
) -> Result<Option<(Pattern, f64)>> {
    best_pattern_with_margin(sys, tiling, tile, target, None, opts)
}

fn best_pattern_with_margin(
    sys: &SwitchedSystem,
    tiling: &Tiling,
    tile: TileId,
    target: &Rect,
    margin: Option<&Rect>,
    opts: &SynthOptions,
) -> Result<Option<(Pattern, f64)>> {
    if target.dims() != sys.dim() {
        return Err(Error::dim("synthesis target", sys.dim(), target.dims()));
    }
    let search = Search {
        sys,
        choices: sys.modes().choices(Scope::Joint),
        tile: tiling.extend_tile_param(tile, opts.extension),
        target: ParamRect::fixed(target),
        margin: margin.cloned(),
        max_len: opts.max_pattern_len,
        slack: opts.slack,
    };
    let best = search.run()?;
    Ok(best
        .seq
        .map(|s| (Pattern::from_joint(sys.modes(), &s), best.a)))
}

fn initial_tiling(base: &Rect, opts: &SynthOptions) -> Tiling {
    match opts.strategy {
        TilingStrategy::GenerateAndTest => Tiling::trivial(base.clone()),
        TilingStrategy::Uniform => Tiling::uniform(base.clone(), opts.max_depth),
    }
}

/// Pattern picked for a tile, with its extension bound.
type Choice = (TileId, Pattern, f64);

/// Generate-and-test: bisect all bad tiles until none remain or the depth
/// budget runs out.
fn solve_tiling(
    sys: &SwitchedSystem,
    base: &Rect,
    margin: Option<&Rect>,
    opts: &SynthOptions,
) -> Result<(Tiling, Vec<Choice>)> {
    if opts.max_pattern_len == 0 {
        return Err(Error::config(
            "synthesis.K",
            "pattern length bound must be at least 1",
        ));
    }
    let mut tiling = initial_tiling(base, opts);
    loop {
        let tiles: Vec<TileId> = tiling.tiles().collect();
        let found: Vec<Option<(Pattern, f64)>> = tiles
            .par_iter()
            .map(|&t| best_pattern_with_margin(sys, &tiling, t, base, margin, opts))
            .collect::<Result<_>>()?;
        let bad: Vec<TileId> = tiles
            .iter()
            .zip(&found)
            .filter(|(_, f)| f.is_none())
            .map(|(&t, _)| t)
            .collect();
        if bad.is_empty() {
            let table = tiles
                .into_iter()
                .zip(found)
                .map(|(t, f)| {
                    let (p, a) = f.expect("good tile");
                    (t, p, a)
                })
                .collect();
            return Ok((tiling, table));
        }
        tiling = tiling.bisect(&bad, opts.max_depth)?;
    }
}

fn ring_holds(
    sys: &SwitchedSystem,
    tiling: &Tiling,
    table: &[(TileId, AffineMap)],
    base: &Rect,
    a: f64,
    opts: &SynthOptions,
) -> bool {
    table.iter().all(|(t, m)| {
        let ext = tiling.extend_tile(*t, a, opts.extension);
        image_bounds(m, &ext)
            .and_then(|img| box_inclusion(&img, base, opts.slack))
            .unwrap_or(false)
    }) && sys.dim() == base.dims()
}

/// One macro-step: a ring steering `base + A` into `base`.
pub fn macro_step_synthesis(
    sys: &SwitchedSystem,
    base: &Rect,
    index: usize,
    opts: &SynthOptions,
) -> Result<Ring> {
    let (tiling, found) = solve_tiling(sys, base, None, opts)?;
    let a_min = found
        .iter()
        .map(|(_, _, a)| *a)
        .fold(f64::INFINITY, f64::min);
    if !a_min.is_finite() {
        return Err(Error::Unbounded);
    }
    let maps: Vec<(TileId, AffineMap)> = found
        .iter()
        .map(|(t, p, _)| Ok((*t, joint_sequence_map(sys, &p.joint(sys.modes()))?)))
        .collect::<Result<_>>()?;
    let a = certify_extension(a_min, |a| ring_holds(sys, &tiling, &maps, base, a, opts));
    build_ring(sys, base, index, a, None, tiling, found, &maps, opts)
}

#[allow(clippy::too_many_arguments)]
fn build_ring(
    sys: &SwitchedSystem,
    base: &Rect,
    index: usize,
    a: f64,
    epsilon: Option<f64>,
    tiling: Tiling,
    found: Vec<(TileId, Pattern, f64)>,
    maps: &[(TileId, AffineMap)],
    opts: &SynthOptions,
) -> Result<Ring> {
    let table = found
        .into_iter()
        .zip(maps)
        .map(|((tile, pattern, a_tile), (_, m))| {
            let certificate = image_bounds(m, &tiling.extend_tile(tile, a, opts.extension))?;
            Ok(TileControl {
                tile,
                pattern,
                a_tile,
                certificate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(table
        .iter()
        .all(|c| box_inclusion(&c.certificate, base, opts.slack).unwrap_or(false)));
    let _ = sys;
    Ok(Ring {
        index,
        base: base.clone(),
        extended: opts.extension.extend_rect(base, a),
        a,
        epsilon,
        extension: opts.extension,
        max_pattern_len: opts.max_pattern_len,
        tiling,
        table,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Iteration<R> {
    pub rings: Vec<R>,
    pub stop: StopReason,
}

impl<R> Iteration<R> {
    pub fn total_extension(&self) -> f64
    where
        R: HasExtension,
    {
        self.rings.iter().map(HasExtension::extension).sum()
    }
}

pub trait HasExtension {
    fn extension(&self) -> f64;
}

impl HasExtension for Ring {
    fn extension(&self) -> f64 {
        self.a
    }
}

/// Nested rings `R^(1), R^(2), …` until a macro-step fails, its extension
/// drops below `eta`, or `max_rings` rings exist. A ring whose extension is
/// below `eta` is not kept.
pub fn iterate_synthesis(
    sys: &SwitchedSystem,
    objective: &Rect,
    opts: &SynthOptions,
    eta: f64,
    max_rings: usize,
) -> Result<Iteration<Ring>> {
    let mut rings: Vec<Ring> = Vec::new();
    let mut base = objective.clone();
    let stop = loop {
        if rings.len() >= max_rings {
            break StopReason::MaxRings;
        }
        match macro_step_synthesis(sys, &base, rings.len() + 1, opts) {
            Ok(ring) if ring.a < eta => break StopReason::BelowThreshold { a: ring.a },
            Ok(ring) => {
                base = ring.extended.clone();
                rings.push(ring);
            }
            Err(Error::Refinement { bad_tiles, depth }) => {
                break StopReason::RefinementFailure { bad_tiles, depth }
            }
            Err(Error::Unbounded) => break StopReason::Unbounded,
            Err(e) => return Err(e),
        }
    };
    Ok(Iteration { rings, stop })
}

/// Stability ring on `objective` (`a = 0`): every tile is mapped back into
/// the objective by a pattern whose intermediate images stay in
/// `objective + ε`.
pub fn stability_synthesis(
    sys: &SwitchedSystem,
    objective: &Rect,
    epsilon: f64,
    opts: &SynthOptions,
) -> Result<Ring> {
    if !(epsilon >= 0.0) {
        return Err(Error::config(
            "synthesis.epsilon",
            "margin must be non-negative",
        ));
    }
    let margin = objective.inflate(epsilon);
    let (tiling, found) = solve_tiling(sys, objective, Some(&margin), opts)?;
    let maps: Vec<(TileId, AffineMap)> = found
        .iter()
        .map(|(t, p, _)| Ok((*t, joint_sequence_map(sys, &p.joint(sys.modes()))?)))
        .collect::<Result<_>>()?;
    build_ring(
        sys,
        objective,
        0,
        0.0,
        Some(epsilon),
        tiling,
        found,
        &maps,
        opts,
    )
}
