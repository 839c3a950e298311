// SPDX-License-Identifier: Apache-2.0

//! Rectangular tilings refined by bisection, and their parametric extension.
//!
//! A tiling is stored as its refinement tree: every bisected node owns
//! `2^n` consecutive children, child bit `j` selecting the upper half in
//! dimension `j`. Leaves are the tiles. Each node keeps per-face flags
//! telling whether it touches the corresponding face of the root; extension
//! by `a` moves exactly the flagged faces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Interval, ParamInterval, ParamRect, Rect};

pub type TileId = usize;

/// Which root faces an extension pushes outwards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionMode {
    /// Only lower faces move: `[l, m] ↦ [l - a, m]`.
    #[default]
    Lower,
    /// `[l, m] ↦ [l - a, m + a]`.
    Symmetric,
}

impl ExtensionMode {
    /// `(lower, upper)` face rates of the extension.
    pub fn rates(self) -> (f64, f64) {
        match self {
            ExtensionMode::Lower => (1.0, 0.0),
            ExtensionMode::Symmetric => (1.0, 1.0),
        }
    }

    /// Extends a whole box (every face counts as a root face).
    pub fn extend_rect(self, r: &Rect, a: f64) -> Rect {
        let (lr, ur) = self.rates();
        let mut out = r.clone();
        for j in 0..out.dims() {
            let iv = out.interval_mut(j);
            iv.lo -= lr * a;
            iv.hi += ur * a;
        }
        out
    }

    /// `r + a + ε`: the extension by `a` plus a margin `ε` on both faces.
    pub fn extend_param_rect(self, r: &Rect, margin: f64) -> ParamRect {
        let (lr, ur) = self.rates();
        ParamRect::fixed(r).widen(margin, lr, ur)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub rect: Rect,
    pub depth: u32,
    /// Per dimension: touches the root's `[lower, upper]` face.
    pub contact: Vec<[bool; 2]>,
    /// Index of the first of `2^n` children, if bisected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<usize>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tiling {
    root: Rect,
    nodes: Vec<Node>,
}

/// Tiles that could not be refined further.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementFailure {
    pub tiles: Vec<Rect>,
    pub depth: u32,
}

impl From<RefinementFailure> for Error {
    fn from(f: RefinementFailure) -> Self {
        Error::Refinement {
            bad_tiles: f.tiles.len(),
            depth: f.depth,
        }
    }
}

impl Tiling {
    pub fn trivial(root: Rect) -> Self {
        let contact = vec![[true, true]; root.dims()];
        Tiling {
            nodes: vec![Node {
                rect: root.clone(),
                depth: 0,
                contact,
                children: None,
            }],
            root,
        }
    }

    /// Every dimension bisected `depth` times: `2^(n·depth)` tiles.
    pub fn uniform(root: Rect, depth: u32) -> Self {
        let mut t = Tiling::trivial(root);
        for _ in 0..depth {
            let leaves: Vec<TileId> = t.tiles().collect();
            t = t.bisect(&leaves, depth).expect("depth budget respected");
        }
        t
    }

    pub fn root(&self) -> &Rect {
        &self.root
    }

    pub fn node(&self, id: TileId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Leaf ids in tree order.
    pub fn tiles(&self) -> impl Iterator<Item = TileId> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf())
    }

    pub fn tile_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn max_depth(&self) -> u32 {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Replaces each bad tile by its `2^n` midpoint children.
    pub fn bisect(&self, bad: &[TileId], max_depth: u32) -> Result<Tiling, RefinementFailure> {
        let stuck: Vec<Rect> = bad
            .iter()
            .filter(|&&id| self.nodes[id].depth >= max_depth)
            .map(|&id| self.nodes[id].rect.clone())
            .collect();
        if !stuck.is_empty() {
            return Err(RefinementFailure {
                tiles: stuck,
                depth: max_depth,
            });
        }
        let mut out = self.clone();
        let n = self.root.dims();
        for &id in bad {
            assert!(out.nodes[id].is_leaf(), "only tiles can be bisected");
            let parent = out.nodes[id].clone();
            let first = out.nodes.len();
            for mask in 0..1usize << n {
                let mut rect = parent.rect.clone();
                let mut contact = parent.contact.clone();
                for j in 0..n {
                    let iv = rect.interval_mut(j);
                    let mid = 0.5 * (iv.lo + iv.hi);
                    if mask >> j & 1 == 1 {
                        iv.lo = mid;
                        contact[j][0] = false;
                    } else {
                        iv.hi = mid;
                        contact[j][1] = false;
                    }
                }
                out.nodes.push(Node {
                    rect,
                    depth: parent.depth + 1,
                    contact,
                    children: None,
                });
            }
            out.nodes[id].children = Some(first);
        }
        Ok(out)
    }

    /// Tile extended by `a`: flagged lower faces move down, and under
    /// symmetric mode flagged upper faces move up. Interior faces stay.
    pub fn extend_tile(&self, id: TileId, a: f64, mode: ExtensionMode) -> Rect {
        self.extend_tile_param(id, mode).at(a)
    }

    pub fn extend_tile_param(&self, id: TileId, mode: ExtensionMode) -> ParamRect {
        let node = &self.nodes[id];
        let (lr, ur) = mode.rates();
        let intervals = node
            .rect
            .intervals()
            .iter()
            .zip(&node.contact)
            .map(|(iv, &[lo_c, hi_c])| ParamInterval {
                lo0: iv.lo,
                lo1: if lo_c { -lr } else { 0.0 },
                hi0: iv.hi,
                hi1: if hi_c { ur } else { 0.0 },
            })
            .collect();
        ParamRect::new(intervals).expect("extension only widens tiles")
    }

    /// Tile owning `x`. Shared faces belong to the tile with larger
    /// coordinates; the root's upper faces are closed.
    pub fn locate(&self, x: &[f64]) -> Result<TileId> {
        if !self.root.contains_point(x) {
            return Err(Error::OutOfDomain { state: x.to_vec() });
        }
        let mut id = 0;
        while let Some(first) = self.nodes[id].children {
            let rect = &self.nodes[id].rect;
            let mask =
                rect.intervals()
                    .iter()
                    .zip(x)
                    .enumerate()
                    .fold(
                        0usize,
                        |m, (j, (iv, &v))| if v >= iv.mid() { m | 1 << j } else { m },
                    );
            id = first + mask;
        }
        Ok(id)
    }

    /// Tile of the extended tiling owning `x`, for `x ∈ root + a`.
    pub fn locate_extended(&self, x: &[f64], a: f64, mode: ExtensionMode) -> Result<TileId> {
        let extended = mode.extend_rect(&self.root, a);
        if !extended.contains_point(x) {
            return Err(Error::OutOfDomain { state: x.to_vec() });
        }
        // points in the added margin belong to the boundary tile they project onto
        let clamped: Vec<f64> = x
            .iter()
            .zip(self.root.intervals())
            .map(|(&v, iv): (&f64, &Interval)| v.clamp(iv.lo, iv.hi))
            .collect();
        self.locate(&clamped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rect(b: &[(f64, f64)]) -> Rect {
        Rect::new(b.iter().map(|&(lo, hi)| Interval { lo, hi }).collect()).unwrap()
    }

    #[test]
    fn trivial_tiling_has_one_full_contact_tile() {
        for root in [
            rect(&[(0.0, 1.0), (0.0, 1.0)]),
            rect(&[(18.5, 22.0), (18.5, 22.0)]),
            Rect::cube(11, 18.0, 22.0).unwrap(),
        ] {
            let t = Tiling::trivial(root.clone());
            let tiles: Vec<_> = t.tiles().collect();
            assert_eq!(tiles.len(), 1);
            assert_eq!(t.node(tiles[0]).rect, root);
            assert_eq!(t.node(tiles[0]).depth, 0);
            assert!(t.node(tiles[0]).contact.iter().all(|c| c[0] && c[1]));
        }
    }

    #[test]
    fn bisect_interval_at_midpoint() {
        let t = Tiling::trivial(rect(&[(0.0, 2.0)]))
            .bisect(&[0], 3)
            .unwrap();
        let rects: Vec<Rect> = t.tiles().map(|i| t.node(i).rect.clone()).collect();
        assert_eq!(rects, vec![rect(&[(0.0, 1.0)]), rect(&[(1.0, 2.0)])]);
    }

    #[test]
    fn bisecting_one_of_four_gives_seven() {
        let t = Tiling::trivial(rect(&[(0.0, 1.0), (0.0, 1.0)]))
            .bisect(&[0], 2)
            .unwrap();
        assert_eq!(t.tile_count(), 4);
        let first = t.tiles().next().unwrap();
        let t = t.bisect(&[first], 2).unwrap();
        assert_eq!(t.tile_count(), 7);
    }

    #[test]
    fn bisect_beyond_budget_fails_with_tiles() {
        let t = Tiling::trivial(rect(&[(0.0, 1.0)]));
        let err = t.bisect(&[0], 0).unwrap_err();
        assert_eq!(err.tiles, vec![rect(&[(0.0, 1.0)])]);
        assert_eq!(err.depth, 0);
    }

    #[test]
    fn contact_flags_follow_coordinates() {
        let root = rect(&[(-1.0, 3.0), (2.0, 5.0), (0.0, 0.5)]);
        let t = Tiling::uniform(root.clone(), 2);
        assert_eq!(t.tile_count(), 64);
        for id in t.tiles() {
            let node = t.node(id);
            for (j, iv) in node.rect.intervals().iter().enumerate() {
                let r = root.intervals()[j];
                assert_eq!(node.contact[j][0], (iv.lo - r.lo).abs() <= 1e-12);
                assert_eq!(node.contact[j][1], (iv.hi - r.hi).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn extension_moves_only_contact_faces() {
        let root = rect(&[(18.5, 22.0), (18.5, 22.0)]);
        let t = Tiling::trivial(root).bisect(&[0], 1).unwrap();
        // child mask 0b10: lower half in dim 0, upper half in dim 1
        let id = t.node(0).children.unwrap() + 0b10;
        assert_eq!(t.node(id).rect, rect(&[(18.5, 20.25), (20.25, 22.0)]));
        assert_eq!(
            t.extend_tile(id, 1.0, ExtensionMode::Lower),
            rect(&[(17.5, 20.25), (20.25, 22.0)])
        );
        assert_eq!(
            t.extend_tile(id, 1.0, ExtensionMode::Symmetric),
            rect(&[(17.5, 20.25), (20.25, 23.0)])
        );
        assert_eq!(
            t.extend_tile(id, 0.0, ExtensionMode::Symmetric),
            t.node(id).rect
        );
    }

    #[test]
    fn interior_tile_unchanged_by_extension() {
        let t = Tiling::uniform(rect(&[(0.0, 4.0)]), 2);
        let interior: Vec<_> = t
            .tiles()
            .filter(|&i| t.node(i).contact.iter().all(|c| !c[0] && !c[1]))
            .collect();
        assert_eq!(interior.len(), 2);
        for id in interior {
            for a in [0.5, 3.0, 100.0] {
                assert_eq!(
                    t.extend_tile(id, a, ExtensionMode::Symmetric),
                    t.node(id).rect
                );
            }
        }
    }

    #[test]
    fn locate_half_open_convention() {
        let t = Tiling::trivial(rect(&[(0.0, 2.0)]))
            .bisect(&[0], 1)
            .unwrap();
        let tiles: Vec<_> = t.tiles().collect();
        assert_eq!(t.locate(&[1.0]).unwrap(), tiles[1]);
        assert_eq!(t.locate(&[0.0]).unwrap(), tiles[0]);
        assert_eq!(t.locate(&[2.0]).unwrap(), tiles[1]);
        assert!(matches!(
            t.locate(&[2.0 + 1e-12]),
            Err(Error::OutOfDomain { .. })
        ));
        let single = Tiling::trivial(rect(&[(0.0, 2.0), (0.0, 2.0)]));
        assert_eq!(single.locate(&[0.7, 1.9]).unwrap(), 0);
    }

    #[test]
    fn locate_upper_corner() {
        let t = Tiling::uniform(rect(&[(0.0, 1.0), (0.0, 1.0)]), 2);
        let id = t.locate(&[1.0, 1.0]).unwrap();
        assert!(t.node(id).rect.contains_point(&[1.0, 1.0]));
        assert_eq!(t.node(id).contact, vec![[false, true], [false, true]]);
    }

    /// Bisects a random subset of tiles a few times.
    fn random_tiling(rng: &mut ChaCha8Rng, root: Rect, rounds: u32) -> Tiling {
        let mut t = Tiling::trivial(root);
        for _ in 0..rounds {
            let bad: Vec<_> = t.tiles().filter(|_| rng.gen_bool(0.5)).collect();
            t = t.bisect(&bad, rounds).unwrap();
        }
        t
    }

    #[test]
    fn coverage_and_disjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let root = rect(&[(18.5, 22.0), (-3.0, 1.0)]);
        let t = random_tiling(&mut rng, root.clone(), 4);
        let vol: f64 = t.tiles().map(|i| t.node(i).rect.volume()).sum();
        assert!((vol - root.volume()).abs() <= 1e-9 * root.volume());
        for _ in 0..10_000 {
            let x: Vec<f64> = root
                .intervals()
                .iter()
                .map(|iv| rng.gen_range(iv.lo..=iv.hi))
                .collect();
            let id = t.locate(&x).unwrap();
            assert!(t.node(id).rect.contains_point(&x));
            // no other tile owns x under the half-open convention
            let owners = t
                .tiles()
                .filter(|&i| {
                    t.node(i)
                        .rect
                        .intervals()
                        .iter()
                        .zip(&x)
                        .zip(&t.node(i).contact)
                        .all(|((iv, &v), c)| v >= iv.lo && (v < iv.hi || (c[1] && v <= iv.hi)))
                })
                .count();
            assert_eq!(owners, 1);
        }
    }

    #[test]
    fn extended_tiles_cover_extended_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let root = rect(&[(0.0, 4.0), (0.0, 2.0)]);
        let t = random_tiling(&mut rng, root.clone(), 3);
        for mode in [ExtensionMode::Lower, ExtensionMode::Symmetric] {
            let a = 1.5;
            let ext_root = mode.extend_rect(&root, a);
            let count_before = t.tile_count();
            let vol: f64 = t.tiles().map(|i| t.extend_tile(i, a, mode).volume()).sum();
            assert!((vol - ext_root.volume()).abs() <= 1e-9 * ext_root.volume());
            assert_eq!(t.tiles().count(), count_before);
            for _ in 0..10_000 {
                let x: Vec<f64> = ext_root
                    .intervals()
                    .iter()
                    .map(|iv| rng.gen_range(iv.lo..=iv.hi))
                    .collect();
                let id = t.locate_extended(&x, a, mode).unwrap();
                assert!(t.extend_tile(id, a, mode).contains_point(&x));
            }
            let below: Vec<f64> = root.lo().iter().map(|v| v - a - 1e-9).collect();
            assert!(t.locate_extended(&below, a, mode).is_err());
        }
    }
}
