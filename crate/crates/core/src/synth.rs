//! Synthetic plan generators for demos, benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::plan::{Category, Dataset, FloorPlan, Room, CANVAS};

const GRID: i64 = 8;

/// A guillotine-split layout snapped to an 8-pixel grid. Some leaves stay
/// empty, like courtyards or the outside of an irregular footprint.
pub fn random_plan(id: impl Into<String>, rng: &mut impl Rng) -> FloorPlan {
    let mut rooms = Vec::new();
    split(rng, [0, 0, CANVAS, CANVAS], 0, &mut rooms);
    if rooms.is_empty() {
        rooms.push(Room::new(Category::Living, 0, 0, CANVAS, CANVAS));
    }
    FloorPlan::new(id, rooms)
}

fn split(rng: &mut impl Rng, b: [i64; 4], depth: usize, rooms: &mut Vec<Room>) {
    let [x0, y0, x1, y1] = b;
    let (w, h) = (x1 - x0, y1 - y0);
    let stop = depth >= 2 && (rng.gen_bool(0.3) || depth >= 5);
    if stop || (w < 4 * GRID && h < 4 * GRID) {
        if rng.gen_bool(0.9) {
            let category = Category::ALL[rng.gen_range(0..Category::ALL.len())];
            rooms.push(Room::new(category, x0, y0, x1, y1));
        }
        return;
    }
    if w >= h {
        let cut = x0 + GRID * rng.gen_range(w / (4 * GRID)..=(3 * w) / (4 * GRID)).max(1);
        split(rng, [x0, y0, cut, y1], depth + 1, rooms);
        split(rng, [cut, y0, x1, y1], depth + 1, rooms);
    } else {
        let cut = y0 + GRID * rng.gen_range(h / (4 * GRID)..=(3 * h) / (4 * GRID)).max(1);
        split(rng, [x0, y0, x1, cut], depth + 1, rooms);
        split(rng, [x0, cut, x1, y1], depth + 1, rooms);
    }
}

pub fn random_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = n.max(1).to_string().len();
    let plans = (0..n)
        .map(|i| random_plan(format!("p{i:0width$}"), &mut rng))
        .collect();
    Dataset::new(plans).expect("generated plans are valid")
}

/// Base plans whose rasters pairwise differ in at least 492 cells, followed by
/// `copies` perturbed copies of the first bases, each within 50 cells of its
/// base (between 10 and 50 cells, cycling). Returns the dataset and, for each
/// copy, `(copy id, base id, cells changed)`.
pub fn duplicate_corpus(bases: usize, copies: usize) -> (Dataset, Vec<(String, String, usize)>) {
    assert!(bases <= 100, "split positions run out past 100 bases");
    assert!(copies <= bases);
    // living | bedroom split at column s, a 10×10 "other" patch in the bottom strip
    let base = |i: usize, patch_top: i64| -> Vec<Room> {
        let s = 28 + 2 * i as i64;
        vec![
            Room::new(Category::Living, 0, 0, s, 246),
            Room::new(Category::Bedroom, s, 0, CANVAS, 246),
            Room::new(Category::Other, 0, patch_top, 10, CANVAS),
        ]
    };
    let mut plans: Vec<FloorPlan> = (0..bases)
        .map(|i| FloorPlan::new(format!("base{i:03}"), base(i, 246)))
        .collect();
    let mut truth = Vec::new();
    for c in 0..copies {
        let rows = (c % 5) as i64 + 1;
        let id = format!("copy{c:03}");
        plans.push(FloorPlan::new(id.clone(), base(c, 246 + rows)));
        truth.push((id, format!("base{c:03}"), (rows * 10) as usize));
    }
    (Dataset::new(plans).expect("corpus plans are valid"), truth)
}
