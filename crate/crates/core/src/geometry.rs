// SPDX-License-Identifier: Apache-2.0

//! Boxes, affine maps and exact interval images.
//!
//! Every set the synthesis manipulates is an axis-aligned box. The image of a
//! box under an affine map is in general a parallelotope; what the inclusion
//! tests need is its bounding box, which is exact coordinate-wise because each
//! output coordinate is a linear function over a box and attains its extremes
//! at vertices.
//!
//! The parametric variants carry bounds that are affine in a scalar
//! extension parameter `a ≥ 0`, which turns "largest `a` for which the image
//! stays inside the target" into a one-variable linear program solved in
//! closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Interval { lo, hi }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Model(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_subset_of(&self, outer: &Interval, slack: f64) -> bool {
        self.lo >= outer.lo - slack && self.hi <= outer.hi + slack
    }
}

/// Axis-aligned box: a product of closed intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rect {
    intervals: Vec<Interval>,
}

impl Rect {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Model("a box needs at least one dimension".into()));
        }
        for i in &intervals {
            Interval::new(i.lo, i.hi)?;
        }
        Ok(Rect { intervals })
    }

    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dim("box bounds", lo.len(), hi.len()));
        }
        Rect::new(
            lo.iter()
                .zip(hi)
                .map(|(&l, &h)| Interval { lo: l, hi: h })
                .collect(),
        )
    }

    /// `[lo, hi]^dims`.
    pub fn cube(dims: usize, lo: f64, hi: f64) -> Result<Self> {
        Rect::new(vec![Interval { lo, hi }; dims])
    }

    pub fn dims(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn lo(&self) -> Vec<f64> {
        self.intervals.iter().map(|i| i.lo).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        self.intervals.iter().map(|i| i.hi).collect()
    }

    pub fn volume(&self) -> f64 {
        self.intervals.iter().map(Interval::width).product()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dims() && self.intervals.iter().zip(x).all(|(i, &v)| i.contains(v))
    }

    /// Concatenates two boxes (`self × other`).
    pub fn product(&self, other: &Rect) -> Rect {
        let mut intervals = self.intervals.clone();
        intervals.extend_from_slice(&other.intervals);
        Rect { intervals }
    }

    /// Coordinates `from..to` as a box.
    pub fn slice(&self, from: usize, to: usize) -> Rect {
        Rect {
            intervals: self.intervals[from..to].to_vec(),
        }
    }

    /// Every face pushed outwards by `margin` (both ends).
    /// Smallest box containing both.
    pub fn hull(&self, other: &Rect) -> Rect {
        Rect {
            intervals: self
                .intervals
                .iter()
                .zip(&other.intervals)
                .map(|(p, q)| Interval {
                    lo: p.lo.min(q.lo),
                    hi: p.hi.max(q.hi),
                })
                .collect(),
        }
    }

    pub fn inflate(&self, margin: f64) -> Rect {
        Rect {
            intervals: self
                .intervals
                .iter()
                .map(|i| Interval {
                    lo: i.lo - margin,
                    hi: i.hi + margin,
                })
                .collect(),
        }
    }

    /// All `2^dims` vertices, in binary-counting order (bit `j` = upper end in dim `j`).
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.dims();
        (0..1usize << n)
            .map(|mask| {
                self.intervals
                    .iter()
                    .enumerate()
                    .map(|(j, i)| if mask >> j & 1 == 1 { i.hi } else { i.lo })
                    .collect()
            })
            .collect()
    }

    pub(crate) fn interval_mut(&mut self, j: usize) -> &mut Interval {
        &mut self.intervals[j]
    }
}

/// `x ↦ M x + c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub matrix: Matrix,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn new(matrix: Matrix, offset: Vec<f64>) -> Result<Self> {
        if matrix.rows() == 0 || matrix.cols() == 0 {
            return Err(Error::Model("affine map with an empty matrix".into()));
        }
        if offset.len() != matrix.rows() {
            return Err(Error::dim("affine map offset", matrix.rows(), offset.len()));
        }
        Ok(AffineMap { matrix, offset })
    }

    pub fn identity(n: usize) -> Self {
        AffineMap {
            matrix: Matrix::identity(n),
            offset: vec![0.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.matrix.mul_vec(x);
        for (v, c) in y.iter_mut().zip(&self.offset) {
            *v += c;
        }
        y
    }

    /// Rows `from..to` of the map.
    pub fn row_block(&self, from: usize, to: usize) -> AffineMap {
        AffineMap {
            matrix: self.matrix.block(from, to, 0, self.cols()),
            offset: self.offset[from..to].to_vec(),
        }
    }
}

/// `x ↦ outer(inner(x))`.
pub fn compose(outer: &AffineMap, inner: &AffineMap) -> Result<AffineMap> {
    if outer.cols() != inner.rows() {
        return Err(Error::dim("compose", outer.cols(), inner.rows()));
    }
    let matrix = outer.matrix.mul(&inner.matrix);
    let offset = outer.apply(&inner.offset);
    Ok(AffineMap { matrix, offset })
}

/// Exact bounding box of `{M x + c : x ∈ input}`.
pub fn image_bounds(map: &AffineMap, input: &Rect) -> Result<Rect> {
    if map.cols() != input.dims() {
        return Err(Error::dim("image_bounds", map.cols(), input.dims()));
    }
    let intervals = (0..map.rows())
        .map(|j| {
            let mut lo = map.offset[j];
            let mut hi = map.offset[j];
            for (m, iv) in map.matrix.row(j).iter().zip(&input.intervals) {
                let (a, b) = (m * iv.lo, m * iv.hi);
                lo += a.min(b);
                hi += a.max(b);
            }
            Interval { lo, hi }
        })
        .collect();
    Ok(Rect { intervals })
}

/// `inner ⊆ outer`, each face compared with an absolute `slack`.
pub fn box_inclusion(inner: &Rect, outer: &Rect, slack: f64) -> Result<bool> {
    if inner.dims() != outer.dims() {
        return Err(Error::dim("box_inclusion", outer.dims(), inner.dims()));
    }
    Ok(inner
        .intervals
        .iter()
        .zip(&outer.intervals)
        .all(|(i, o)| i.is_subset_of(o, slack)))
}

/// Bounds `lo(a) = lo0 + lo1·a`, `hi(a) = hi0 + hi1·a`, for `a ≥ 0`.
///
/// Well-formedness for every `a ≥ 0` is `lo0 ≤ hi0` and `lo1 ≤ hi1`: the box
/// may only widen as `a` grows. That keeps the endpoint selected by each
/// matrix entry's sign the same for the whole parameter range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamInterval {
    pub lo0: f64,
    pub lo1: f64,
    pub hi0: f64,
    pub hi1: f64,
}

impl ParamInterval {
    pub fn new(lo0: f64, lo1: f64, hi0: f64, hi1: f64) -> Result<Self> {
        if !(lo0 <= hi0) || !(lo1 <= hi1) {
            return Err(Error::Model(format!(
                "parametric interval [{lo0}{lo1:+}a, {hi0}{hi1:+}a] is not well-formed for all a ≥ 0"
            )));
        }
        Ok(ParamInterval { lo0, lo1, hi0, hi1 })
    }

    pub fn fixed(i: Interval) -> Self {
        ParamInterval {
            lo0: i.lo,
            lo1: 0.0,
            hi0: i.hi,
            hi1: 0.0,
        }
    }

    pub fn at(&self, a: f64) -> Interval {
        Interval {
            lo: self.lo0 + self.lo1 * a,
            hi: self.hi0 + self.hi1 * a,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamRect {
    intervals: Vec<ParamInterval>,
}

impl ParamRect {
    pub fn new(intervals: Vec<ParamInterval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Model("a box needs at least one dimension".into()));
        }
        for i in &intervals {
            ParamInterval::new(i.lo0, i.lo1, i.hi0, i.hi1)?;
        }
        Ok(ParamRect { intervals })
    }

    pub fn fixed(rect: &Rect) -> Self {
        ParamRect {
            intervals: rect
                .intervals
                .iter()
                .copied()
                .map(ParamInterval::fixed)
                .collect(),
        }
    }

    pub fn dims(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[ParamInterval] {
        &self.intervals
    }

    pub fn at(&self, a: f64) -> Rect {
        Rect {
            intervals: self.intervals.iter().map(|p| p.at(a)).collect(),
        }
    }

    pub fn product(&self, other: &ParamRect) -> ParamRect {
        let mut intervals = self.intervals.clone();
        intervals.extend_from_slice(&other.intervals);
        ParamRect { intervals }
    }

    /// A parametric box containing both for every `a ≥ 0`: coefficient-wise
    /// min of the lower bounds and max of the upper bounds.
    pub fn hull(&self, other: &ParamRect) -> ParamRect {
        ParamRect {
            intervals: self
                .intervals
                .iter()
                .zip(&other.intervals)
                .map(|(p, q)| ParamInterval {
                    lo0: p.lo0.min(q.lo0),
                    lo1: p.lo1.min(q.lo1),
                    hi0: p.hi0.max(q.hi0),
                    hi1: p.hi1.max(q.hi1),
                })
                .collect(),
        }
    }

    /// Adds a constant margin and an `a`-proportional margin to the faces:
    /// lower faces move by `-(constant + lower_rate·a)`, upper faces by
    /// `+(constant + upper_rate·a)`.
    pub fn widen(&self, constant: f64, lower_rate: f64, upper_rate: f64) -> ParamRect {
        ParamRect {
            intervals: self
                .intervals
                .iter()
                .map(|p| ParamInterval {
                    lo0: p.lo0 - constant,
                    lo1: p.lo1 - lower_rate,
                    hi0: p.hi0 + constant,
                    hi1: p.hi1 + upper_rate,
                })
                .collect(),
        }
    }
}

/// Parametric image: bounds of `{M x + c : x ∈ input(a)}` as affine functions of `a`.
pub fn image_bounds_param(map: &AffineMap, input: &ParamRect) -> Result<ParamRect> {
    if map.cols() != input.dims() {
        return Err(Error::dim("image_bounds_param", map.cols(), input.dims()));
    }
    let intervals = (0..map.rows())
        .map(|j| {
            let c = map.offset[j];
            let mut out = ParamInterval {
                lo0: c,
                lo1: 0.0,
                hi0: c,
                hi1: 0.0,
            };
            for (&m, p) in map.matrix.row(j).iter().zip(&input.intervals) {
                if m >= 0.0 {
                    out.lo0 += m * p.lo0;
                    out.lo1 += m * p.lo1;
                    out.hi0 += m * p.hi0;
                    out.hi1 += m * p.hi1;
                } else {
                    out.lo0 += m * p.hi0;
                    out.lo1 += m * p.hi1;
                    out.hi0 += m * p.lo0;
                    out.hi1 += m * p.lo1;
                }
            }
            out
        })
        .collect();
    Ok(ParamRect { intervals })
}

/// Running solution of `max { a ≥ 0 : g0_i + g1_i·a ≥ 0 for all i }`.
///
/// `None` once some constraint is violated at `a = 0`; `+∞` while no
/// constraint bounds `a` from above.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtensionBound(Option<f64>);

impl Default for ExtensionBound {
    fn default() -> Self {
        ExtensionBound(Some(f64::INFINITY))
    }
}

impl ExtensionBound {
    pub fn infeasible() -> Self {
        ExtensionBound(None)
    }

    pub fn value(self) -> Option<f64> {
        self.0
    }

    pub fn is_feasible(self) -> bool {
        self.0.is_some()
    }

    /// Adds `g0 + g1·a ≥ -slack`.
    pub fn require(&mut self, g0: f64, g1: f64, slack: f64) {
        let Some(best) = self.0 else { return };
        let g0 = g0 + slack;
        if !(g0 >= 0.0) {
            self.0 = None;
        } else if g1 < 0.0 {
            self.0 = Some(best.min(g0 / -g1));
        }
    }

    /// Adds `image(a) ⊆ target(a)` coordinate-wise.
    pub fn require_inclusion(&mut self, image: &ParamRect, target: &ParamRect, slack: f64) {
        for (p, t) in image.intervals.iter().zip(&target.intervals) {
            self.require(p.lo0 - t.lo0, p.lo1 - t.lo1, slack);
            self.require(t.hi0 - p.hi0, t.hi1 - p.hi1, slack);
            if self.0.is_none() {
                return;
            }
        }
    }
}

/// `sup { a ≥ 0 : image(a) ⊆ target }`: `None` if infeasible at `a = 0`,
/// `Some(+∞)` if no face ever binds.
pub fn max_param_inclusion(image: &ParamRect, target: &Rect) -> Result<Option<f64>> {
    max_param_inclusion_in(image, &ParamRect::fixed(target), 0.0)
}

/// As [`max_param_inclusion`] with a target that itself moves with `a`.
pub fn max_param_inclusion_in(
    image: &ParamRect,
    target: &ParamRect,
    slack: f64,
) -> Result<Option<f64>> {
    if image.dims() != target.dims() {
        return Err(Error::dim(
            "max_param_inclusion",
            target.dims(),
            image.dims(),
        ));
    }
    let mut bound = ExtensionBound::default();
    bound.require_inclusion(image, target, slack);
    Ok(bound.value())
}
