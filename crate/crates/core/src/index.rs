//! Exact k-nearest and k-farthest queries over an embedding.
//!
//! [`scan`] is the reference: an exhaustive pass over every point.
//! [`SpatialIndex`] is a median-split k-d tree that must return exactly the
//! same `(id, distance)` sequences. Results are ordered by distance, ties by
//! ascending id.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    #[default]
    Nearest,
    Farthest,
}

impl std::str::FromStr for Order {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "nearest" => Ok(Order::Nearest),
            "farthest" => Ok(Order::Farthest),
            other => Err(format!("unknown order \"{other}\" (expected nearest|farthest)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub distance: f64,
}

fn point_distance(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Ranks `a` before `b` under `order`.
fn ranks_before(order: Order, a: (f64, &str), b: (f64, &str)) -> bool {
    match order {
        Order::Nearest => a.0 < b.0 || (a.0 == b.0 && a.1 < b.1),
        Order::Farthest => a.0 > b.0 || (a.0 == b.0 && a.1 < b.1),
    }
}

fn check_query(dim: usize, query: &[f64], k: usize) -> Result<()> {
    if query.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: query.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    Ok(())
}

/// Exhaustive reference query.
pub fn scan(
    embedding: &Embedding,
    query: &[f64],
    k: usize,
    order: Order,
    exclude: Option<&str>,
) -> Result<Vec<Neighbor>> {
    check_query(embedding.dim(), query, k)?;
    let mut all: Vec<(f64, &str)> = embedding
        .iter()
        .filter(|(id, _)| Some(*id) != exclude)
        .map(|(id, p)| (point_distance(query, p), id))
        .collect();
    all.sort_by(|a, b| {
        if ranks_before(order, *a, *b) {
            Ordering::Less
        } else if ranks_before(order, *b, *a) {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    });
    all.truncate(k);
    Ok(all
        .into_iter()
        .map(|(distance, id)| Neighbor {
            id: id.to_string(),
            distance,
        })
        .collect())
}

#[derive(Clone, Debug)]
struct Node {
    start: usize,
    end: usize,
    /// children; `None` for leaves
    children: Option<(usize, usize)>,
}

/// Balanced k-d tree over `(coordinate, id)` pairs. Immutable once built.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    dim: usize,
    ids: Vec<String>,
    points: Vec<f64>,
    /// per node: `dim` lower bounds followed by `dim` upper bounds
    bounds: Vec<f64>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn build(embedding: &Embedding) -> Self {
        let dim = embedding.dim();
        let mut order: Vec<usize> = (0..embedding.len()).collect();
        let mut index = SpatialIndex {
            dim,
            ids: Vec::new(),
            points: Vec::new(),
            bounds: Vec::new(),
            nodes: Vec::new(),
        };
        if !order.is_empty() {
            let len = order.len();
            index.build_node(embedding, &mut order, 0, len);
        }
        index.ids = order.iter().map(|&i| embedding.ids()[i].clone()).collect();
        index.points = order
            .iter()
            .flat_map(|&i| embedding.point(i).iter().copied())
            .collect();
        index
    }

    fn build_node(&mut self, e: &Embedding, order: &mut [usize], start: usize, end: usize) -> usize {
        let d = self.dim;
        let node = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            children: None,
        });
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in &order[start..end] {
            for (k, &c) in e.point(i).iter().enumerate() {
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c);
            }
        }
        self.bounds.extend_from_slice(&lo);
        self.bounds.extend_from_slice(&hi);

        if end - start > LEAF_SIZE {
            let axis = (0..d)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
                .unwrap_or(0);
            let mid = start + (end - start) / 2;
            order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                e.point(a)[axis].total_cmp(&e.point(b)[axis]).then(a.cmp(&b))
            });
            let left = self.build_node(e, order, start, mid);
            let right = self.build_node(e, order, mid, end);
            self.nodes[node].children = Some((left, right));
        }
        node
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.iter().any(|i| i == id)
    }

    fn node_bounds(&self, node: usize) -> (&[f64], &[f64]) {
        let d = self.dim;
        let b = &self.bounds[node * 2 * d..(node + 1) * 2 * d];
        b.split_at(d)
    }

    /// Smallest (nearest) or largest (farthest) possible distance from the
    /// query to any point inside the node's box.
    fn bound(&self, node: usize, query: &[f64], order: Order) -> f64 {
        let (lo, hi) = self.node_bounds(node);
        let mut s = 0.0;
        for k in 0..self.dim {
            let q = query[k];
            let gap = match order {
                Order::Nearest => {
                    if q < lo[k] {
                        lo[k] - q
                    } else if q > hi[k] {
                        q - hi[k]
                    } else {
                        0.0
                    }
                }
                Order::Farthest => (q - lo[k]).abs().max((hi[k] - q).abs()),
            };
            s += gap * gap;
        }
        s.sqrt()
    }

    pub fn knn(&self, query: &[f64], k: usize, exclude: Option<&str>) -> Result<Vec<Neighbor>> {
        self.query(query, k, Order::Nearest, exclude)
    }

    pub fn kfarthest(&self, query: &[f64], k: usize, exclude: Option<&str>) -> Result<Vec<Neighbor>> {
        self.query(query, k, Order::Farthest, exclude)
    }

    pub fn query(
        &self,
        query: &[f64],
        k: usize,
        order: Order,
        exclude: Option<&str>,
    ) -> Result<Vec<Neighbor>> {
        check_query(self.dim, query, k)?;
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if !self.nodes.is_empty() {
            self.visit(0, query, k, order, exclude, &mut best);
        }
        Ok(best
            .into_iter()
            .map(|(distance, slot)| Neighbor {
                id: self.ids[slot].clone(),
                distance,
            })
            .collect())
    }

    /// Whether a node whose bound is `bound` may still hold a result.
    fn worth_visiting(&self, bound: f64, k: usize, order: Order, best: &[(f64, usize)]) -> bool {
        if best.len() < k {
            return true;
        }
        let worst = best[best.len() - 1].0;
        match order {
            // equal bounds are visited: a tied point with a smaller id may win
            Order::Nearest => bound <= worst,
            Order::Farthest => bound >= worst,
        }
    }

    fn visit(
        &self,
        node: usize,
        query: &[f64],
        k: usize,
        order: Order,
        exclude: Option<&str>,
        best: &mut Vec<(f64, usize)>,
    ) {
        let Node {
            start,
            end,
            children,
        } = self.nodes[node];
        match children {
            None => {
                let d = self.dim;
                for slot in start..end {
                    let id = self.ids[slot].as_str();
                    if Some(id) == exclude {
                        continue;
                    }
                    let dist = point_distance(query, &self.points[slot * d..(slot + 1) * d]);
                    self.offer(k, order, best, dist, slot);
                }
            }
            Some((left, right)) => {
                let bl = self.bound(left, query, order);
                let br = self.bound(right, query, order);
                let left_first = match order {
                    Order::Nearest => bl <= br,
                    Order::Farthest => bl >= br,
                };
                let visits = if left_first {
                    [(left, bl), (right, br)]
                } else {
                    [(right, br), (left, bl)]
                };
                for (child, bound) in visits {
                    if self.worth_visiting(bound, k, order, best) {
                        self.visit(child, query, k, order, exclude, best);
                    }
                }
            }
        }
    }

    fn offer(&self, k: usize, order: Order, best: &mut Vec<(f64, usize)>, dist: f64, slot: usize) {
        let key = (dist, self.ids[slot].as_str());
        if best.len() == k {
            let (wd, ws) = best[k - 1];
            if !ranks_before(order, key, (wd, self.ids[ws].as_str())) {
                return;
            }
        }
        let pos = best
            .iter()
            .position(|&(d, s)| ranks_before(order, key, (d, self.ids[s].as_str())))
            .unwrap_or(best.len());
        best.insert(pos, (dist, slot));
        best.truncate(k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points(coords: &[(&str, [f64; 2])]) -> Embedding {
        let mut e = Embedding::new(2, 0);
        for (id, c) in coords {
            e.push(*id, c).unwrap();
        }
        e
    }

    #[test]
    fn single_point() {
        let e = points(&[("a", [1.0, 2.0])]);
        let idx = SpatialIndex::build(&e);
        assert_eq!(idx.len(), 1);
        let hit = idx.knn(&[1.0, 2.0], 1, None).unwrap();
        assert_eq!(hit, vec![Neighbor { id: "a".into(), distance: 0.0 }]);
    }

    #[test]
    fn ties_prefer_smaller_id() {
        let e = points(&[("b", [1.0, 0.0]), ("a", [-1.0, 0.0]), ("c", [0.0, 0.5])]);
        let idx = SpatialIndex::build(&e);
        assert_eq!(idx.knn(&[0.0, 0.0], 2, None).unwrap()[1].id, "a");
        assert_eq!(idx.kfarthest(&[0.0, 0.0], 1, None).unwrap()[0].id, "a");
        assert_eq!(scan(&e, &[0.0, 0.0], 1, Order::Farthest, None).unwrap()[0].id, "a");
    }

    #[test]
    fn farthest_excluding_self() {
        let e = points(&[("a", [0.0, 0.0]), ("b", [3.0, 4.0])]);
        let idx = SpatialIndex::build(&e);
        let far = idx.kfarthest(&[0.0, 0.0], 1, Some("a")).unwrap();
        assert_eq!(far, vec![Neighbor { id: "b".into(), distance: 5.0 }]);
        let near = idx.knn(&[0.0, 0.0], 5, Some("a")).unwrap();
        assert_eq!(near.len(), 1);
    }

    #[test]
    fn errors() {
        let e = points(&[("a", [0.0, 0.0])]);
        let idx = SpatialIndex::build(&e);
        assert!(matches!(
            idx.knn(&[0.0, 0.0, 0.0], 1, None),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert!(idx.knn(&[0.0, 0.0], 0, None).is_err());
    }

    #[test]
    fn agrees_with_scan_on_clumped_data() {
        // many duplicate coordinates stress the tie rule
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut e = Embedding::new(3, 0);
        for i in 0..400 {
            let c: [f64; 3] = std::array::from_fn(|_| f64::from(rng.gen_range(0..4u8)));
            e.push(format!("p{i:03}"), &c).unwrap();
        }
        let idx = SpatialIndex::build(&e);
        for _ in 0..50 {
            let q: [f64; 3] = std::array::from_fn(|_| f64::from(rng.gen_range(0..4u8)) * 0.9);
            for k in [1, 7, 40] {
                for order in [Order::Nearest, Order::Farthest] {
                    assert_eq!(
                        idx.query(&q, k, order, Some("p001")).unwrap(),
                        scan(&e, &q, k, order, Some("p001")).unwrap()
                    );
                }
            }
        }
    }
}
