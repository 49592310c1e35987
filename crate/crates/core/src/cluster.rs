use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterAssignment {
    pub k: usize,
    /// One label per embedding point, in embedding order.
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Total within-cluster squared distance after each assignment step.
    pub inertia_history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn label_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id).map(|k| self.labels[k])
    }

    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }

    pub fn to_tsv(&self) -> String {
        let mut text = String::new();
        for (id, label) in self.ids.iter().zip(&self.labels) {
            text.push_str(&format!("{id}\t{label}\n"));
        }
        text
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_tsv().as_bytes())
    }
}

/// Reads `id` TAB `label` lines as written by [`ClusterAssignment::write_tsv`].
pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, usize>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = line
            .split_once('\t')
            .and_then(|(id, label)| Some((id, label.trim().parse::<usize>().ok()?)));
        let (id, label) = parsed.ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: "expected id<TAB>label".into(),
        })?;
        labels.insert(id.to_string(), label);
    }
    Ok(labels)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid, lowest index on ties.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's k-means with greedy farthest-point seeding.
///
/// The first seed is drawn uniformly with the seeded generator; each further
/// seed is the point farthest from all chosen seeds (lowest index on ties).
/// A cluster left empty is re-seeded with the point farthest from its own
/// centroid.
pub fn kmeans(embedding: &Embedding, k: usize, seed: u64, max_iters: usize) -> Result<ClusterAssignment> {
    let n = embedding.len();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "cluster count {k} outside 1..={n}"
        )));
    }
    let d = embedding.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let first = rng.gen_range(0..n);
    let mut centroids = vec![embedding.point(first).to_vec()];
    let mut gap: Vec<f64> = (0..n)
        .map(|i| sq_dist(embedding.point(i), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let (far, _) = gap
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &g)| if g > acc.1 { (i, g) } else { acc });
        let c = embedding.point(far).to_vec();
        for (i, g) in gap.iter_mut().enumerate() {
            *g = g.min(sq_dist(embedding.point(i), &c));
        }
        centroids.push(c);
    }

    let mut labels = vec![usize::MAX; n];
    let mut inertia_history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, dist) = nearest(embedding.point(i), &centroids);
            changed |= labels[i] != c;
            labels[i] = c;
            dists[i] = dist;
        }

        // empty clusters take the point farthest from its current centroid
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| sizes[labels[i]] > 1)
                .fold(None, |acc: Option<usize>, i| match acc {
                    Some(j) if dists[j] >= dists[i] => Some(j),
                    _ => Some(i),
                });
            if let Some(i) = donor {
                sizes[labels[i]] -= 1;
                sizes[c] = 1;
                labels[i] = c;
                dists[i] = 0.0;
                centroids[c] = embedding.point(i).to_vec();
                changed = true;
            }
        }

        // centroid update: mean of members
        let mut sums = vec![vec![0.0; d]; k];
        for i in 0..n {
            for (s, x) in sums[labels[i]].iter_mut().zip(embedding.point(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / sizes[c] as f64).collect();
            }
        }
        let inertia: f64 = (0..n)
            .map(|i| sq_dist(embedding.point(i), &centroids[labels[i]]))
            .sum();
        inertia_history.push(inertia);
        iterations += 1;

        if !changed || iterations >= max_iters.max(1) {
            break;
        }
    }

    Ok(ClusterAssignment {
        k,
        ids: embedding.ids().to_vec(),
        labels,
        centroids,
        iterations,
        inertia_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Embedding {
        let mut e = Embedding::new(1, 0);
        for (i, x) in xs.iter().enumerate() {
            e.push(format!("p{i}"), &[*x]).unwrap();
        }
        e
    }

    #[test]
    fn one_cluster_is_the_mean() {
        let e = line(&[1.0, 2.0, 6.0]);
        let c = kmeans(&e, 1, 0, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(c.labels, vec![0, 0, 0]);
        assert!((c.centroids[0][0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let e = line(&[1.0, 2.0, 6.0, -4.0]);
        let c = kmeans(&e, 4, 9, DEFAULT_MAX_ITERS).unwrap();
        let mut labels = c.labels.clone();
        labels.sort();
        assert_eq!(labels, vec![0, 1, 2, 3]);
        assert_eq!(c.inertia(), 0.0);
    }

    #[test]
    fn duplicates_still_fill_every_cluster() {
        let e = line(&[1.0, 1.0, 1.0]);
        let c = kmeans(&e, 3, 0, DEFAULT_MAX_ITERS).unwrap();
        let mut labels = c.labels.clone();
        labels.sort();
        assert_eq!(labels, vec![0, 1, 2]);
    }

    #[test]
    fn out_of_range_k() {
        let e = line(&[1.0]);
        assert!(kmeans(&e, 0, 0, 10).is_err());
        assert!(kmeans(&e, 2, 0, 10).is_err());
    }

    #[test]
    fn tsv_lines() {
        let e = line(&[0.0, 10.0]);
        let c = kmeans(&e, 2, 0, 10).unwrap();
        let text = c.to_tsv();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("p0\t"));
    }
}
