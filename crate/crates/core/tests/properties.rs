// SPDX-License-Identifier: Apache-2.0

mod common;

use proptest::prelude::*;
use serde_json::json;

use common::*;
use switchsynth::artifact::{synthesize, Artifact};
use switchsynth::geometry::{
    image_bounds, image_bounds_param, max_param_inclusion, AffineMap, ParamInterval, ParamRect,
    Rect,
};
use switchsynth::linalg::Matrix;
use switchsynth::runtime::verify::verify_artifact;
use switchsynth::runtime::{simulate, Schedule, Segment};
use switchsynth::tiling::{ExtensionMode, Tiling};

fn affine(n: usize) -> impl Strategy<Value = AffineMap> {
    (
        prop::collection::vec(-2.0f64..2.0, n * n),
        prop::collection::vec(-5.0f64..5.0, n),
    )
        .prop_map(move |(m, c)| {
            let rows: Vec<Vec<f64>> = m.chunks(n).map(<[f64]>::to_vec).collect();
            AffineMap::new(Matrix::from_rows(&rows).unwrap(), c).unwrap()
        })
}

fn boxed(n: usize) -> impl Strategy<Value = Rect> {
    prop::collection::vec((-10.0f64..10.0, 0.0f64..5.0), n).prop_map(|v| {
        let lo: Vec<f64> = v.iter().map(|p| p.0).collect();
        let hi: Vec<f64> = v.iter().map(|p| p.0 + p.1).collect();
        Rect::from_bounds(&lo, &hi).unwrap()
    })
}

fn map_and_box() -> impl Strategy<Value = (AffineMap, Rect)> {
    (1usize..=6).prop_flat_map(|n| (affine(n), boxed(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn image_bounds_are_exact((map, b) in map_and_box()) {
        let img = image_bounds(&map, &b).unwrap();
        let images: Vec<Vec<f64>> = b.vertices().iter().map(|v| map.apply(v)).collect();
        for (j, iv) in img.intervals().iter().enumerate() {
            let tol = 1e-9 * (1.0 + iv.lo.abs().max(iv.hi.abs()));
            for y in &images {
                prop_assert!(y[j] >= iv.lo - tol && y[j] <= iv.hi + tol);
            }
            prop_assert!(images.iter().any(|y| (y[j] - iv.lo).abs() <= tol));
            prop_assert!(images.iter().any(|y| (y[j] - iv.hi).abs() <= tol));
        }
    }

    #[test]
    fn parametric_image_specializes(
        (map, b) in map_and_box(),
        flags in prop::collection::vec((any::<bool>(), any::<bool>()), 6),
        a in 0.0f64..20.0,
    ) {
        let p = ParamRect::new(
            b.intervals()
                .iter()
                .zip(&flags)
                .map(|(iv, &(l, h))| ParamInterval::new(iv.lo, if l { -1.0 } else { 0.0 }, iv.hi, if h { 1.0 } else { 0.0 }).unwrap())
                .collect(),
        )
        .unwrap();
        let lhs = image_bounds_param(&map, &p).unwrap().at(a);
        let rhs = image_bounds(&map, &p.at(a)).unwrap();
        for (x, y) in lhs.intervals().iter().zip(rhs.intervals()) {
            let tol = 1e-9 * (1.0 + x.lo.abs().max(x.hi.abs()));
            prop_assert!((x.lo - y.lo).abs() <= tol && (x.hi - y.hi).abs() <= tol);
        }
    }

    #[test]
    fn max_inclusion_is_tight(
        (map, b) in map_and_box(),
        grow in prop::collection::vec(0.0f64..3.0, 6),
    ) {
        let n = b.dims();
        let p = ParamRect::new(
            b.intervals().iter().map(|iv| ParamInterval::new(iv.lo, -1.0, iv.hi, 0.0).unwrap()).collect(),
        ).unwrap();
        let image = image_bounds_param(&map, &p).unwrap();
        let at0 = image.at(0.0);
        let target = Rect::from_bounds(
            &at0.lo().iter().zip(&grow).map(|(l, g)| l - g).collect::<Vec<_>>(),
            &at0.hi().iter().zip(&grow[..n].iter().rev().collect::<Vec<_>>()).map(|(h, g)| h + *g).collect::<Vec<_>>(),
        ).unwrap();
        let a = max_param_inclusion(&image, &target).unwrap().expect("feasible at a = 0");
        let inside = |a: f64| image.at(a).intervals().iter().zip(target.intervals()).all(|(x, t)| x.lo >= t.lo && x.hi <= t.hi);
        if a.is_finite() {
            prop_assert!(inside((a - 1e-9).max(0.0)));
            prop_assert!(!inside(a + 1e-6));
        } else {
            prop_assert!(inside(1e6));
        }
    }

    #[test]
    fn located_tile_holds_point(
        b in boxed(3),
        picks in prop::collection::vec(0usize..64, 0..6),
        u in prop::collection::vec(0.0f64..=1.0, 3),
        a in 0.0f64..2.0,
    ) {
        let mut t = Tiling::trivial(b.clone());
        for p in picks {
            let tiles: Vec<_> = t.tiles().collect();
            let pick = tiles[p % tiles.len()];
            t = t.bisect(&[pick], 4).unwrap_or(t);
        }
        let x: Vec<f64> = b.intervals().iter().zip(&u).map(|(iv, s)| iv.lo + s * iv.width()).collect();
        let id = t.locate(&x).unwrap();
        prop_assert!(t.node(id).rect.contains_point(&x));
        let vol: f64 = t.tiles().map(|id| t.node(id).rect.volume()).sum();
        prop_assert!((vol - b.volume()).abs() <= 1e-9 * b.volume().max(1.0));
        // a point in the lower margin lands on a tile whose extension holds it
        let y: Vec<f64> = x.iter().zip(b.lo()).map(|(v, l)| v - (v - l) - a * 0.5).collect();
        let id = t.locate_extended(&y, a, ExtensionMode::Lower).unwrap();
        prop_assert!(t.extend_tile(id, a, ExtensionMode::Lower).contains_point(&y));
    }

    #[test]
    fn schedule_is_piecewise_constant(values in prop::collection::vec(-5.0f64..5.0, 1..6), t in 0usize..200) {
        let segments: Vec<Segment> = values.iter().enumerate().map(|(i, &w)| Segment { from: 10 + 30 * i, w }).collect();
        let s = Schedule::new(segments.clone()).unwrap();
        let expected = segments.iter().rev().find(|g| g.from <= t).map_or(0.0, |g| g.w);
        prop_assert_eq!(s.value(t), expected);
        prop_assert_eq!(s.scaled(2.0).value(t), 2.0 * expected);
    }
}

fn random_two_room(seed: u64) -> Option<Artifact> {
    let mut r = rng(seed);
    let spec = HeatingSpec {
        split: (1, 1),
        coupling_in: 0.0,
        coupling_out: 0.1,
        leak: 0.0,
        max_active: None,
    };
    let cfg = heating_config(
        &mut r,
        &spec,
        json!({ "K": 3, "D": 1, "epsilon": 1.0, "max_rings": 6, "eta": 0.01 }),
    );
    synthesize(&cfg).ok().filter(|a| a.ring_count() > 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn artifacts_round_trip(seed in any::<u64>()) {
        let Some(art) = random_two_room(seed) else { return Ok(()) };
        let back = Artifact::from_json(&art.to_json()).unwrap();
        prop_assert_eq!(&back, &art);
        prop_assert!(verify_artifact(&back).passed());
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), u in prop::collection::vec(0.0f64..=1.0, 2)) {
        let Some(art) = random_two_room(seed) else { return Ok(()) };
        let s = art.outer_box();
        let x0: Vec<f64> = s.intervals().iter().zip(&u).map(|(iv, t)| iv.lo + t * iv.width()).collect();
        let a = simulate(&art, &x0, 150, &Schedule::default()).unwrap();
        let b = simulate(&art, &x0, 150, &Schedule::default()).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn random_centralized_certificates_hold() {
    let mut successes = 0;
    for seed in 0..60u64 {
        let Some(art) = random_two_room(seed) else {
            continue;
        };
        successes += 1;
        let report = verify_artifact(&art);
        assert!(report.passed(), "seed {seed}: {report}");
        let (bad, first) = sample_rings(&art, 200, seed);
        assert_eq!(bad, 0, "seed {seed}: {first:?}");
        let (bad, first) = sample_closed_loop(&art, 50, 100, seed);
        assert_eq!(bad, 0, "seed {seed}: {first:?}");
        if successes == 20 {
            break;
        }
    }
    assert_eq!(successes, 20, "too few random systems could be synthesized");
}

#[test]
fn random_coupled_distributed_certificates_hold() {
    let mut successes = 0;
    for seed in 0..30u64 {
        let mut r = rng(1000 + seed);
        let spec = HeatingSpec {
            split: (2, 2),
            coupling_in: 0.05,
            coupling_out: 0.03,
            leak: 0.05,
            max_active: None,
        };
        let cfg = heating_config(
            &mut r,
            &spec,
            json!({ "K": 3, "D": 1, "epsilon": 0.5, "mode": "distributed", "max_rings": 3, "eta": 0.01 }),
        );
        let Ok(art) = synthesize(&cfg) else { continue };
        if art.ring_count() == 0 {
            continue;
        }
        successes += 1;
        let report = verify_artifact(&art);
        assert!(report.passed(), "seed {seed}: {report}");
        let (bad, first) = sample_rings(&art, 200, seed);
        assert_eq!(bad, 0, "seed {seed}: {first:?}");
    }
    assert!(successes >= 5, "only {successes} syntheses succeeded");
}
