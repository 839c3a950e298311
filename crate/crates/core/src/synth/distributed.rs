// SPDX-License-Identifier: Apache-2.0

//! Distributed synthesis: each component picks its pattern from its own
//! state only, and treats the other component as an unknown point of that
//! component's extended box widened by `ε`.

use num_integer::lcm;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::centralized::{HasExtension, Iteration};
use super::{certify_extension, float_serde, Coupling, StopReason, SynthOptions, TilingStrategy};
use crate::error::{Error, Result};
use crate::geometry::{
    box_inclusion, image_bounds, image_bounds_param, AffineMap, ExtensionBound, ParamRect, Rect,
};
use crate::system::{Scope, SwitchedSystem};
use crate::tiling::{ExtensionMode, TileId, Tiling};

/// Over-approximation `X^0 … X^ℓ` of one component under a local pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproxSequence {
    pub component: usize,
    pub tile: TileId,
    pub pattern: Vec<usize>,
    pub frame: DistFrame,
    /// Component base the final step must land in.
    pub base: Rect,
    pub steps: Vec<ParamRect>,
}

/// Per-ring constants of the over-approximation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistFrame {
    pub epsilon: f64,
    pub extension: ExtensionMode,
    pub coupling: Coupling,
}

impl DistFrame {
    pub fn new(epsilon: f64, opts: &SynthOptions) -> Self {
        DistFrame {
            epsilon,
            extension: opts.extension,
            coupling: opts.coupling,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalControl {
    pub tile: TileId,
    pub pattern: Vec<usize>,
    #[serde(with = "float_serde")]
    pub a_tile: f64,
}

/// One component's share of a distributed ring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentRing {
    pub base: Rect,
    /// Fixed pattern length of every entry of the table.
    pub k: usize,
    /// Repetitions per ring period: `ℓ = α·k`.
    pub alpha: usize,
    /// Best extension this component alone admits at length `k`.
    #[serde(with = "float_serde")]
    pub a: f64,
    pub tiling: Tiling,
    pub table: Vec<LocalControl>,
}

impl ComponentRing {
    pub fn control(&self, tile: TileId) -> Option<&LocalControl> {
        self.table.iter().find(|c| c.tile == tile)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistRing {
    /// 0 for the stability ring.
    pub index: usize,
    pub a: f64,
    pub epsilon: f64,
    pub extension: ExtensionMode,
    pub max_pattern_len: usize,
    #[serde(default)]
    pub coupling: Coupling,
    /// `lcm(k1, k2)`.
    pub ell: usize,
    pub components: [ComponentRing; 2],
}

impl DistRing {
    /// The joint base `R1 × R2`.
    pub fn base(&self) -> Rect {
        self.components[0].base.product(&self.components[1].base)
    }

    pub fn extended(&self) -> Rect {
        self.extension.extend_rect(&self.base(), self.a)
    }

    pub fn frame(&self) -> DistFrame {
        DistFrame {
            epsilon: self.epsilon,
            extension: self.extension,
            coupling: self.coupling,
        }
    }
}

impl HasExtension for DistRing {
    fn extension(&self) -> f64 {
        self.a
    }
}

/// Local row-block maps per local mode of component `c`.
struct ComponentModel {
    c: usize,
    maps: Vec<Vec<AffineMap>>,
}

impl ComponentModel {
    fn new(sys: &SwitchedSystem, c: usize, coupling: Coupling) -> Self {
        let maps = (0..sys.modes().component_count(c))
            .map(|u| {
                let mut all = sys.component_maps(c, u);
                if coupling == Coupling::Nominal {
                    all.truncate(1);
                }
                all
            })
            .collect();
        ComponentModel { c, maps }
    }

    fn joint_input<T: Joinable>(&self, own: &T, other: &T) -> T {
        if self.c == 0 {
            own.join(other)
        } else {
            other.join(own)
        }
    }

    fn step_param(&self, own: &ParamRect, other: &ParamRect, u: usize) -> Result<ParamRect> {
        let input = self.joint_input(own, other);
        let mut out: Option<ParamRect> = None;
        for m in &self.maps[u] {
            let img = image_bounds_param(m, &input)?;
            out = Some(match out {
                None => img,
                Some(h) => h.hull(&img),
            });
        }
        out.ok_or_else(|| {
            Error::Model(format!(
                "component {} mode {u} has no admissible joint mode",
                self.c + 1
            ))
        })
    }

    fn step_at(&self, own: &Rect, other: &Rect, u: usize) -> Result<Rect> {
        let input = self.joint_input(own, other);
        let mut out: Option<Rect> = None;
        for m in &self.maps[u] {
            let img = image_bounds(m, &input)?;
            out = Some(match out {
                None => img,
                Some(h) => h.hull(&img),
            });
        }
        out.ok_or_else(|| {
            Error::Model(format!(
                "component {} mode {u} has no admissible joint mode",
                self.c + 1
            ))
        })
    }
}

trait Joinable {
    fn join(&self, other: &Self) -> Self;
}

impl Joinable for ParamRect {
    fn join(&self, other: &Self) -> Self {
        self.product(other)
    }
}

impl Joinable for Rect {
    fn join(&self, other: &Self) -> Self {
        self.product(other)
    }
}

fn check_components(sys: &SwitchedSystem) -> Result<()> {
    let (n1, n2) = sys.split();
    if n1 == 0 || n2 == 0 {
        return Err(Error::config(
            "split",
            "distributed synthesis needs two non-empty components",
        ));
    }
    let modes = sys.modes();
    if (0..modes.joint_count()).any(|u| !modes.is_joint_allowed(u)) {
        return Err(Error::config(
            "constraints.global_max_active",
            "a global limit couples the components' choices; use per-component limits",
        ));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::config(
            "synthesis.epsilon",
            "margin must be positive and finite",
        ));
    }
    Ok(())
}

/// `X^0 = tile + a`, `X^k = f_c(X^{k-1}, other + a + ε, π(k))`.
pub fn approx_sequence(
    sys: &SwitchedSystem,
    component: usize,
    tiling: &Tiling,
    tile: TileId,
    other_base: &Rect,
    pattern: &[usize],
    frame: DistFrame,
) -> Result<ApproxSequence> {
    let DistFrame {
        epsilon, extension, ..
    } = frame;
    if component > 1 {
        return Err(Error::Model(format!("no component {}", component + 1)));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::config(
            "synthesis.epsilon",
            "margin must be non-negative",
        ));
    }
    let own_dim = sys.component_range(component).len();
    if tiling.root().dims() != own_dim {
        return Err(Error::dim(
            "component tiling",
            own_dim,
            tiling.root().dims(),
        ));
    }
    if other_base.dims() != sys.dim() - own_dim {
        return Err(Error::dim(
            "other component box",
            sys.dim() - own_dim,
            other_base.dims(),
        ));
    }
    let model = ComponentModel::new(sys, component, frame.coupling);
    let count = sys.modes().component_count(component);
    if let Some(&u) = pattern.iter().find(|&&u| u >= count) {
        return Err(Error::Model(format!(
            "component {} has no mode {u}",
            component + 1
        )));
    }
    let other = extension.extend_param_rect(other_base, epsilon);
    let mut steps = vec![tiling.extend_tile_param(tile, extension)];
    for &u in pattern {
        let next = model.step_param(steps.last().expect("X^0"), &other, u)?;
        steps.push(next);
    }
    Ok(ApproxSequence {
        component,
        tile,
        pattern: pattern.to_vec(),
        frame,
        base: tiling.root().clone(),
        steps,
    })
}

fn prop_bound(seq: &ApproxSequence) -> ExtensionBound {
    let margin = seq
        .frame
        .extension
        .extend_param_rect(&seq.base, seq.frame.epsilon);
    let fixed = ParamRect::fixed(&seq.base);
    let last = seq.steps.len() - 1;
    let mut bound = ExtensionBound::default();
    for (k, x) in seq.steps.iter().enumerate().skip(1) {
        bound.require_inclusion(x, if k == last { &fixed } else { &margin }, 0.0);
    }
    bound
}

/// Prefixes inside `base + a + ε`, final step inside `base`.
pub fn prop_check(seq: &ApproxSequence, a: f64) -> bool {
    if seq.steps.len() < 2 {
        return false;
    }
    let margin = seq
        .frame
        .extension
        .extend_rect(&seq.base, a)
        .inflate(seq.frame.epsilon);
    let last = seq.steps.len() - 1;
    seq.steps.iter().enumerate().skip(1).all(|(k, x)| {
        let target = if k == last { &seq.base } else { &margin };
        box_inclusion(&x.at(a), target, 0.0).unwrap_or(false)
    })
}

/// `max { a ≥ 0 : Prop(a) }`, `None` when `Prop(0)` fails.
pub fn max_extension_distributed(seq: &ApproxSequence) -> Option<f64> {
    if seq.steps.len() < 2 {
        return None;
    }
    prop_bound(seq).value()
}

/// Point-evaluated sequence at a fixed `a`, with the exact hull over the
/// other component's modes. Used to certify and re-verify.
pub fn approx_boxes_at(
    sys: &SwitchedSystem,
    component: usize,
    start: &Rect,
    other: &Rect,
    pattern: &[usize],
    coupling: Coupling,
) -> Result<Vec<Rect>> {
    let model = ComponentModel::new(sys, component, coupling);
    let mut out = vec![start.clone()];
    for &u in pattern {
        let next = model.step_at(out.last().expect("X^0"), other, u)?;
        out.push(next);
    }
    Ok(out)
}

/// `Prop(a)` recomputed from scratch for one table entry.
#[allow(clippy::too_many_arguments)]
pub fn prop_holds_at(
    sys: &SwitchedSystem,
    component: usize,
    tiling: &Tiling,
    tile: TileId,
    other_base: &Rect,
    pattern: &[usize],
    a: f64,
    frame: DistFrame,
    slack: f64,
) -> Result<bool> {
    let DistFrame {
        epsilon,
        extension,
        coupling,
    } = frame;
    let start = tiling.extend_tile(tile, a, extension);
    let other = extension.extend_rect(other_base, a).inflate(epsilon);
    let margin = extension.extend_rect(tiling.root(), a).inflate(epsilon);
    let boxes = approx_boxes_at(sys, component, &start, &other, pattern, coupling)?;
    let last = boxes.len() - 1;
    if last == 0 {
        return Ok(false);
    }
    for (k, x) in boxes.iter().enumerate().skip(1) {
        let target = if k == last { tiling.root() } else { &margin };
        if !box_inclusion(x, target, slack)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Best pattern per length `k = 1..=K` for one tile: index `k-1`.
type PerLength = Vec<Option<(Vec<usize>, f64)>>;

struct TileSearch<'s> {
    model: &'s ComponentModel,
    choices: Vec<usize>,
    other: ParamRect,
    base: ParamRect,
    margin: ParamRect,
    max_len: usize,
    slack: f64,
}

impl TileSearch<'_> {
    fn run(&self, start: &ParamRect) -> Result<PerLength> {
        let mut best = vec![None; self.max_len];
        let mut seq = Vec::with_capacity(self.max_len);
        self.descend(start, ExtensionBound::default(), &mut seq, &mut best)?;
        Ok(best)
    }

    fn descend(
        &self,
        x: &ParamRect,
        prefix: ExtensionBound,
        seq: &mut Vec<usize>,
        best: &mut PerLength,
    ) -> Result<()> {
        for &u in &self.choices {
            let next = self.model.step_param(x, &self.other, u)?;
            seq.push(u);
            let mut fin = prefix;
            fin.require_inclusion(&next, &self.base, self.slack);
            if let Some(a) = fin.value() {
                let slot = &mut best[seq.len() - 1];
                // lexicographic visiting order settles ties
                if slot.as_ref().is_none_or(|(_, b)| a > *b) {
                    *slot = Some((seq.clone(), a));
                }
            }
            if seq.len() < self.max_len {
                let mut inner = prefix;
                inner.require_inclusion(&next, &self.margin, self.slack);
                if inner.is_feasible() {
                    self.descend(&next, inner, seq, best)?;
                }
            }
            seq.pop();
        }
        Ok(())
    }
}

/// Outcome of one component's generate-and-test.
struct ComponentSolution {
    k: usize,
    a: f64,
    tiling: Tiling,
    table: Vec<LocalControl>,
}

fn solve_component(
    sys: &SwitchedSystem,
    c: usize,
    base: &Rect,
    other_base: &Rect,
    epsilon: f64,
    opts: &SynthOptions,
) -> Result<ComponentSolution> {
    if opts.max_pattern_len == 0 {
        return Err(Error::config(
            "synthesis.K",
            "pattern length bound must be at least 1",
        ));
    }
    let model = ComponentModel::new(sys, c, opts.coupling);
    let search = TileSearch {
        model: &model,
        choices: sys.modes().choices(Scope::Component(c)),
        other: opts.extension.extend_param_rect(other_base, epsilon),
        base: ParamRect::fixed(base),
        margin: opts.extension.extend_param_rect(base, epsilon),
        max_len: opts.max_pattern_len,
        slack: opts.slack,
    };
    let mut tiling = match opts.strategy {
        TilingStrategy::GenerateAndTest => Tiling::trivial(base.clone()),
        TilingStrategy::Uniform => Tiling::uniform(base.clone(), opts.max_depth),
    };
    loop {
        let tiles: Vec<TileId> = tiling.tiles().collect();
        let found: Vec<PerLength> = tiles
            .par_iter()
            .map(|&t| search.run(&tiling.extend_tile_param(t, opts.extension)))
            .collect::<Result<_>>()?;

        let mut pick: Option<(usize, f64)> = None;
        for k in 1..=opts.max_pattern_len {
            let all = found
                .iter()
                .map(|f| f[k - 1].as_ref().map(|(_, a)| *a))
                .collect::<Option<Vec<f64>>>();
            if let Some(all) = all {
                let a = all.into_iter().fold(f64::INFINITY, f64::min);
                if pick.is_none_or(|(_, b)| a > b) {
                    pick = Some((k, a));
                }
            }
        }
        if let Some((k, a)) = pick {
            let table = tiles
                .iter()
                .zip(&found)
                .map(|(&tile, f)| {
                    let (pattern, a_tile) = f[k - 1].clone().expect("good for k");
                    LocalControl {
                        tile,
                        pattern,
                        a_tile,
                    }
                })
                .collect();
            return Ok(ComponentSolution {
                k,
                a,
                tiling,
                table,
            });
        }

        let mut bad: Vec<TileId> = tiles
            .iter()
            .zip(&found)
            .filter(|(_, f)| f.iter().all(Option::is_none))
            .map(|(&t, _)| t)
            .collect();
        let no_common = bad.is_empty();
        if no_common {
            // every tile has some length; refine where the most widely
            // shared length still fails
            let k = (1..=opts.max_pattern_len)
                .min_by_key(|&k| found.iter().filter(|f| f[k - 1].is_none()).count())
                .expect("K ≥ 1");
            bad = tiles
                .iter()
                .zip(&found)
                .filter(|(_, f)| f[k - 1].is_none())
                .map(|(&t, _)| t)
                .collect();
        }
        tiling = match tiling.bisect(&bad, opts.max_depth) {
            Ok(t) => t,
            Err(_) if no_common => return Err(Error::NoCommonLength { component: c + 1 }),
            Err(e) => return Err(e.into()),
        };
    }
}

fn ring_holds(
    sys: &SwitchedSystem,
    sols: &[ComponentSolution; 2],
    bases: &[Rect; 2],
    a: f64,
    epsilon: f64,
    opts: &SynthOptions,
) -> bool {
    (0..2).all(|c| {
        sols[c].table.iter().all(|e| {
            prop_holds_at(
                sys,
                c,
                &sols[c].tiling,
                e.tile,
                &bases[1 - c],
                &e.pattern,
                a,
                DistFrame::new(epsilon, opts),
                opts.slack,
            )
            .unwrap_or(false)
        })
    })
}

fn assemble(
    index: usize,
    a: f64,
    epsilon: f64,
    bases: [Rect; 2],
    sols: [ComponentSolution; 2],
    opts: &SynthOptions,
) -> DistRing {
    let ell = lcm(sols[0].k, sols[1].k);
    let [b0, b1] = bases;
    let [s0, s1] = sols;
    let part = |base: Rect, s: ComponentSolution| ComponentRing {
        base,
        k: s.k,
        alpha: ell / s.k,
        a: s.a,
        tiling: s.tiling,
        table: s.table,
    };
    DistRing {
        index,
        a,
        epsilon,
        extension: opts.extension,
        max_pattern_len: opts.max_pattern_len,
        coupling: opts.coupling,
        ell,
        components: [part(b0, s0), part(b1, s1)],
    }
}

fn split_objective(sys: &SwitchedSystem, objective: &Rect) -> Result<[Rect; 2]> {
    if objective.dims() != sys.dim() {
        return Err(Error::dim("objective R", sys.dim(), objective.dims()));
    }
    let (n1, _) = sys.split();
    Ok([objective.slice(0, n1), objective.slice(n1, sys.dim())])
}

fn solve_both(
    sys: &SwitchedSystem,
    bases: &[Rect; 2],
    epsilon: f64,
    opts: &SynthOptions,
) -> Result<[ComponentSolution; 2]> {
    let (s0, s1) = rayon::join(
        || solve_component(sys, 0, &bases[0], &bases[1], epsilon, opts),
        || solve_component(sys, 1, &bases[1], &bases[0], epsilon, opts),
    );
    Ok([s0?, s1?])
}

/// One distributed macro-step on the component boxes `R1`, `R2`.
pub fn macro_step_synthesis_distributed(
    sys: &SwitchedSystem,
    r1: &Rect,
    r2: &Rect,
    index: usize,
    epsilon: f64,
    opts: &SynthOptions,
) -> Result<DistRing> {
    check_components(sys)?;
    check_epsilon(epsilon)?;
    let bases = [r1.clone(), r2.clone()];
    split_objective(sys, &r1.product(r2))?;
    let sols = solve_both(sys, &bases, epsilon, opts)?;
    let a_min = sols[0].a.min(sols[1].a);
    if !a_min.is_finite() {
        return Err(Error::Unbounded);
    }
    let a = certify_extension(a_min, |a| ring_holds(sys, &sols, &bases, a, epsilon, opts));
    Ok(assemble(index, a, epsilon, bases, sols, opts))
}

/// Nested distributed rings, with the stopping rules of the centralized
/// iteration.
pub fn iterate_synthesis_distributed(
    sys: &SwitchedSystem,
    objective: &Rect,
    epsilon: f64,
    opts: &SynthOptions,
    eta: f64,
    max_rings: usize,
) -> Result<Iteration<DistRing>> {
    let [mut b1, mut b2] = split_objective(sys, objective)?;
    let mut rings = Vec::new();
    let stop = loop {
        if rings.len() >= max_rings {
            break StopReason::MaxRings;
        }
        match macro_step_synthesis_distributed(sys, &b1, &b2, rings.len() + 1, epsilon, opts) {
            Ok(ring) if ring.a < eta => break StopReason::BelowThreshold { a: ring.a },
            Ok(ring) => {
                b1 = opts.extension.extend_rect(&b1, ring.a);
                b2 = opts.extension.extend_rect(&b2, ring.a);
                rings.push(ring);
            }
            Err(Error::Refinement { bad_tiles, depth }) => {
                break StopReason::RefinementFailure { bad_tiles, depth }
            }
            Err(Error::NoCommonLength { component }) => {
                break StopReason::NoCommonLength { component }
            }
            Err(Error::Unbounded) => break StopReason::Unbounded,
            Err(e) => return Err(e),
        }
    };
    Ok(Iteration { rings, stop })
}

/// Distributed stability ring on the objective: `Prop(0)` for every tile,
/// so each component lands back in its box with all intermediate states in
/// `R + ε`.
pub fn stability_synthesis_distributed(
    sys: &SwitchedSystem,
    objective: &Rect,
    epsilon: f64,
    opts: &SynthOptions,
) -> Result<DistRing> {
    check_components(sys)?;
    check_epsilon(epsilon)?;
    let bases = split_objective(sys, objective)?;
    let sols = solve_both(sys, &bases, epsilon, opts)?;
    if !ring_holds(sys, &sols, &bases, 0.0, epsilon, opts) {
        return Err(Error::Model(
            "stability certificates fail on re-evaluation".into(),
        ));
    }
    Ok(assemble(0, 0.0, epsilon, bases, sols, opts))
}
