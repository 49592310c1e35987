use planspace::cluster::DEFAULT_MAX_ITERS;
use planspace::prune::redundant_count;
use planspace::synth::{duplicate_corpus, random_dataset};
use planspace::{kmeans, pixel_diff, prune_redundant, rasterize, scan, Embedding, Order, SpatialIndex};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn cloud(seed: u64, n: usize, dim: usize) -> Embedding {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = (0..n).map(|k| format!("pt{k:04}")).collect();
    let coords = (0..n * dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    Embedding::from_parts(dim, seed, ids, coords).unwrap()
}

#[test]
fn index_is_deterministic_and_complete() {
    let emb = cloud(1, 1000, 3);
    let (a, b) = (SpatialIndex::build(&emb), SpatialIndex::build(&emb));
    assert_eq!(a.len(), 1000);
    for (id, p) in emb.iter() {
        assert!(a.contains(id));
        let hit = a.knn(p, 1, None).unwrap();
        assert_eq!(hit[0].distance, 0.0);
        assert_eq!(a.knn(p, 7, None).unwrap(), b.knn(p, 7, None).unwrap());
    }
    let one = Embedding::from_parts(2, 0, vec!["x".into()], vec![0.5, 0.5]).unwrap();
    assert_eq!(SpatialIndex::build(&one).len(), 1);
}

#[test]
fn two_blobs_split_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for k in 0..200 {
        let center = if k < 100 { 0.0 } else { 10.0 };
        ids.push(format!("b{k:03}"));
        coords.push(center + noise.sample(&mut rng));
        coords.push(noise.sample(&mut rng));
    }
    let emb = Embedding::from_parts(2, 0, ids, coords).unwrap();
    for seed in 0..5 {
        let c = kmeans(&emb, 2, seed, DEFAULT_MAX_ITERS).unwrap();
        let first = c.labels[0];
        assert!(c.labels[..100].iter().all(|&l| l == first));
        assert!(c.labels[100..].iter().all(|&l| l != first));
    }
}

#[test]
fn centroids_are_member_means() {
    let emb = cloud(4, 300, 3);
    let c = kmeans(&emb, 6, 2, DEFAULT_MAX_ITERS).unwrap();
    for (label, centroid) in c.centroids.iter().enumerate() {
        let members: Vec<&[f64]> = (0..emb.len()).filter(|&k| c.labels[k] == label).map(|k| emb.point(k)).collect();
        assert!(!members.is_empty());
        for axis in 0..3 {
            let mean = members.iter().map(|p| p[axis]).sum::<f64>() / members.len() as f64;
            assert!((mean - centroid[axis]).abs() <= 1e-9);
        }
    }
}

#[test]
fn corpus_prunes_exactly_the_copies() {
    let (ds, truth) = duplicate_corpus(100, 20);
    let plans = ds.plans();
    // bases are far apart from each other
    let rasters: Vec<_> = plans[..100].iter().map(|p| rasterize(p, 256)).collect();
    for a in 0..100 {
        for b in a + 1..100 {
            assert!(pixel_diff(&rasters[a], &rasters[b]).unwrap() >= 200);
        }
    }
    let groups = prune_redundant(&ds, 50, 256).unwrap();
    assert_eq!(redundant_count(&groups), 20);
    assert_eq!(groups.len(), 20);
    for (copy, base, cells) in &truth {
        let g = groups.iter().find(|g| g.representative == *base).unwrap();
        assert_eq!(g.members, vec![base.clone(), copy.clone()]);
        assert_eq!(g.diffs[1], *cells);
        assert!(*cells <= 50);
    }
    // every member within threshold of its representative, rechecked from scratch
    for g in &groups {
        let rep = rasterize(ds.get(&g.representative).unwrap(), 256);
        for m in &g.members {
            assert!(pixel_diff(&rep, &rasterize(ds.get(m).unwrap(), 256)).unwrap() <= 50);
        }
    }
    assert_eq!(groups, prune_redundant(&ds, 50, 256).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ranked_distances_are_monotone(seed in 0u64..10_000, k in 1usize..40) {
        let emb = cloud(seed, 200, 3);
        let index = SpatialIndex::build(&emb);
        let q = [0.3, 0.7, 0.1];
        let near = index.knn(&q, k, None).unwrap();
        let far = index.kfarthest(&q, k, None).unwrap();
        prop_assert!(near.windows(2).all(|w| w[0].distance <= w[1].distance));
        prop_assert!(far.windows(2).all(|w| w[0].distance >= w[1].distance));
        prop_assert_eq!(near, scan(&emb, &q, k, Order::Nearest, None).unwrap());
    }

    #[test]
    fn inertia_never_increases(seed in 0u64..10_000, k in 1usize..12) {
        let emb = cloud(seed, 120, 2);
        let c = kmeans(&emb, k, seed, DEFAULT_MAX_ITERS).unwrap();
        prop_assert!(c.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(c.labels.iter().all(|&l| l < k));
    }

    #[test]
    fn pixel_diff_is_a_metric(s1 in 0u64..300, s2 in 0u64..300, s3 in 0u64..300) {
        let r = |s| rasterize(&random_dataset(1, s).into_plans()[0], 64);
        let (a, b, c) = (r(s1), r(s2), r(s3));
        let ab = pixel_diff(&a, &b).unwrap();
        prop_assert_eq!(ab, pixel_diff(&b, &a).unwrap());
        prop_assert_eq!(ab == 0, a == b);
        prop_assert!(pixel_diff(&a, &c).unwrap() <= ab + pixel_diff(&b, &c).unwrap());
    }
}
