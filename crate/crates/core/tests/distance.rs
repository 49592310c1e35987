use std::cell::Cell;
use std::collections::BTreeSet;

use planspace::distance::{parse_table, table_to_tsv};
use planspace::synth::random_dataset;
use planspace::{
    build_distance_table, cosine_distance, iou, iou_distance, plan_iou, rasterize, select_triples,
    Category, Dataset, FloorPlan, IouMode, Room,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1024).prop_filter("nonzero", |v| v.iter().any(|x| *x != 0.0))
}

/// Cell-by-cell IoU written independently of the library.
fn naive_iou(a: &FloorPlan, b: &FloorPlan, occupancy: bool) -> f64 {
    let (ra, rb) = (rasterize(a, 256), rasterize(b, 256));
    let (mut inter, mut union) = (0usize, 0usize);
    for y in 0..256 {
        for x in 0..256 {
            let (p, q) = (ra.get(x, y), rb.get(x, y));
            if p != 0 || q != 0 {
                union += 1;
            }
            if p != 0 && q != 0 && (occupancy || p == q) {
                inter += 1;
            }
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[test]
fn four_plan_table_matches_direct_oracle_calls() {
    let ds = random_dataset(4, 21);
    let plans = ds.plans();
    let universe: BTreeSet<String> = plans.iter().map(|p| p.id.clone()).collect();
    let mut pairs = Vec::new();
    for a in 0..4 {
        for b in a + 1..4 {
            pairs.push((plans[a].id.as_str(), plans[b].id.as_str()));
        }
    }
    let table = build_distance_table(&universe, pairs, |i, j| {
        iou_distance(
            &rasterize(ds.get(i).unwrap(), 256),
            &rasterize(ds.get(j).unwrap(), 256),
            IouMode::Category,
        )
    })
    .unwrap();
    assert_eq!(table.len(), 6);
    for (i, j, d) in table.iter() {
        assert!((0.0..=1.0).contains(&d));
        let expect = 1.0 - naive_iou(ds.get(i).unwrap(), ds.get(j).unwrap(), false);
        assert_eq!(d, expect, "{i}-{j}");
    }
}

#[test]
fn geometric_iou_equals_raster_iou() {
    let ds = random_dataset(40, 5);
    for a in ds.plans() {
        for b in ds.plans().iter().take(10) {
            for (mode, occ) in [(IouMode::Category, false), (IouMode::Occupancy, true)] {
                let raster = iou(&rasterize(a, 256), &rasterize(b, 256), mode).unwrap();
                assert_eq!(plan_iou(a, b, mode).to_bits(), raster.to_bits());
                assert_eq!(raster, naive_iou(a, b, occ));
            }
        }
    }
}

#[test]
fn triples_recheck_against_iou() {
    let ds = random_dataset(30, 8);
    let triples = select_triples(&ds, 3, 4, IouMode::Category).unwrap();
    assert_eq!(triples.len(), 90);
    for t in &triples {
        assert!(t.anchor != t.positive && t.anchor != t.negative && t.positive != t.negative);
        let a = ds.get(&t.anchor).unwrap();
        let pos = naive_iou(a, ds.get(&t.positive).unwrap(), false);
        let neg = naive_iou(a, ds.get(&t.negative).unwrap(), false);
        assert!(pos > neg || (pos == neg && t.positive < t.negative));
    }
    assert_eq!(triples, select_triples(&ds, 3, 4, IouMode::Category).unwrap());
}

#[test]
fn triple_orders_by_iou() {
    let room = |x1| Room::new(Category::Living, 0, 0, x1, 10);
    // IoU(A,B) = 0.8, IoU(A,C) = 0.2
    let ds = Dataset::new(vec![
        FloorPlan::new("A", vec![room(100)]),
        FloorPlan::new("B", vec![room(80)]),
        FloorPlan::new("C", vec![room(20)]),
    ])
    .unwrap();
    let triples = select_triples(&ds, 1, 0, IouMode::Category).unwrap();
    assert_eq!((triples[0].positive.as_str(), triples[0].negative.as_str()), ("B", "C"));
}

#[test]
fn oracle_runs_once_per_distinct_pair() {
    let universe: BTreeSet<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let calls = Cell::new(0);
    let table = build_distance_table(
        &universe,
        [("a", "b"), ("b", "a"), ("a", "b"), ("c", "b")],
        |_, _| {
            calls.set(calls.get() + 1);
            Ok(0.5)
        },
    )
    .unwrap();
    assert_eq!(table.len(), 2);
    assert_eq!(calls.get(), 2);
    assert!(build_distance_table(&universe, [("a", "z")], |_, _| Ok(0.5)).is_err());
}

#[test]
fn oracle_errors_name_the_pair() {
    let universe: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
    let err = build_distance_table(&universe, [("b", "a")], |_, _| Ok(3.0)).unwrap_err();
    let text = err.to_string();
    assert!(text.contains('a') && text.contains('b'), "{text}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cosine_is_symmetric_bounded_and_scale_free(u in vector(), v in vector(), c in 0.01f64..100.0) {
        let d = cosine_distance(&u, &v).unwrap();
        prop_assert!((0.0..=2.0).contains(&d));
        prop_assert_eq!(d, cosine_distance(&v, &u).unwrap());
        prop_assert!(cosine_distance(&u, &u).unwrap().abs() <= 1e-12);
        let scaled: Vec<f64> = u.iter().map(|x| c * x).collect();
        prop_assert!(cosine_distance(&u, &scaled).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn iou_symmetric_and_occupancy_dominates(s1 in 0u64..500, s2 in 0u64..500) {
        let a = random_dataset(1, s1).into_plans().remove(0);
        let b = random_dataset(1, s2).into_plans().remove(0);
        let (ra, rb) = (rasterize(&a, 64), rasterize(&b, 64));
        let cat = iou(&ra, &rb, IouMode::Category).unwrap();
        prop_assert_eq!(cat, iou(&rb, &ra, IouMode::Category).unwrap());
        prop_assert!(iou(&ra, &rb, IouMode::Occupancy).unwrap() >= cat);
        prop_assert_eq!(iou(&ra, &ra, IouMode::Category).unwrap(), 1.0);
    }

    #[test]
    fn table_ignores_pair_order(seed in 0u64..1000) {
        let ids: Vec<String> = (0..8).map(|k| format!("i{k}")).collect();
        let universe: BTreeSet<String> = ids.iter().cloned().collect();
        let mut pairs = Vec::new();
        for a in 0..8 {
            for b in 0..8 {
                if a != b && (a * 7 + b * 3) % 4 == 0 {
                    pairs.push((ids[a].as_str(), ids[b].as_str()));
                }
            }
        }
        let oracle = |i: &str, j: &str| Ok(((i.len() * 31 + j.len() * 17) % 10) as f64 / 10.0 + if i < j { 0.01 } else { 0.02 });
        let sorted = build_distance_table(&universe, pairs.clone(), oracle).unwrap();
        pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = build_distance_table(&universe, pairs, oracle).unwrap();
        prop_assert_eq!(&sorted, &shuffled);
        let round = parse_table(&table_to_tsv(&sorted), std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(round.iter().collect::<Vec<_>>(), sorted.iter().collect::<Vec<_>>());
    }
}
