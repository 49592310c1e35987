//! Target distances for the embedding: cosine encoding of feature vectors,
//! IoU over rasters, anchor/positive/negative triple selection and the
//! sparse distance table with its TSV format.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::{format_float, write_atomic};
use crate::plan::{Dataset, FloorPlan, Raster};

pub const FEATURE_LEN: usize = 1024;

/// Largest value the cosine encoding can produce.
pub const MAX_DISTANCE: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if values.len() != FEATURE_LEN {
            return Err(Error::LengthMismatch(FEATURE_LEN, values.len()));
        }
        if norm(&values) == 0.0 {
            return Err(Error::ZeroNorm(id));
        }
        Ok(FeatureVector { id, values })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `1 - cos(u, v)`, in `[0, 2]`.
///
/// The cosine is clamped to `[-1, 1]` before encoding so rounding can never
/// push the result outside the documented range.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm(String::new()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let cos = (dot / (nu * nv)).clamp(-1.0, 1.0);
    Ok(cos * -1.0 + 1.0)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(parse_err(lineno, "empty id".into()));
        }
        let values = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(lineno, "non-finite feature value".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let fv = FeatureVector::new(id, values).map_err(|e| match e {
            Error::LengthMismatch(want, got) => {
                parse_err(lineno, format!("expected {want} values, got {got}"))
            }
            other => other,
        })?;
        out.push(fv);
    }
    Ok(out)
}

pub fn write_features(features: &[FeatureVector], path: impl AsRef<Path>) -> Result<()> {
    let mut text = String::new();
    for fv in features {
        text.push_str(&fv.id);
        for v in &fv.values {
            text.push('\t');
            text.push_str(&format_float(*v));
        }
        text.push('\n');
    }
    write_atomic(path.as_ref(), text.as_bytes())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IouMode {
    /// A cell counts as shared only when both labels are equal and non-empty.
    #[default]
    Category,
    /// All room labels collapse to "occupied".
    Occupancy,
}

/// Intersection over union of two rasters. Two empty rasters have IoU 1.
pub fn iou(a: &Raster, b: &Raster, mode: IouMode) -> Result<f64> {
    if a.resolution() != b.resolution() {
        return Err(Error::ResolutionMismatch(a.resolution(), b.resolution()));
    }
    let mut inter = 0u64;
    let mut union = 0u64;
    for (&x, &y) in a.cells().iter().zip(b.cells()) {
        let occupied = (x != 0) | (y != 0);
        union += u64::from(occupied);
        let shared = match mode {
            IouMode::Category => x == y && x != 0,
            IouMode::Occupancy => x != 0 && y != 0,
        };
        inter += u64::from(shared);
    }
    Ok(ratio(inter, union))
}

pub fn iou_distance(a: &Raster, b: &Raster, mode: IouMode) -> Result<f64> {
    Ok(1.0 - iou(a, b, mode)?)
}

fn ratio(inter: u64, union: u64) -> f64 {
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU of two plans at the native 256 resolution, computed from room boxes
/// instead of rasters. Gives bit-identical values to rasterizing at 256 and
/// calling [`iou`], without allocating grids.
pub fn plan_iou(a: &FloorPlan, b: &FloorPlan, mode: IouMode) -> f64 {
    let area = |p: &FloorPlan| p.rooms.iter().map(|r| r.area()).sum::<i64>();
    let mut both = 0i64;
    let mut same = 0i64;
    for ra in &a.rooms {
        for rb in &b.rooms {
            let overlap = ra.intersection_area(rb);
            both += overlap;
            if ra.category == rb.category {
                same += overlap;
            }
        }
    }
    let union = area(a) + area(b) - both;
    let inter = match mode {
        IouMode::Category => same,
        IouMode::Occupancy => both,
    };
    ratio(inter as u64, union as u64)
}

pub fn plan_iou_distance(a: &FloorPlan, b: &FloorPlan, mode: IouMode) -> f64 {
    1.0 - plan_iou(a, b, mode)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub anchor: String,
    pub positive: String,
    pub negative: String,
}

impl Triple {
    /// The three unordered pairs whose distances the triple provides.
    pub fn pairs(&self) -> [(String, String); 3] {
        [
            (self.anchor.clone(), self.positive.clone()),
            (self.anchor.clone(), self.negative.clone()),
            (self.positive.clone(), self.negative.clone()),
        ]
    }
}

/// For each plan as anchor, draws `per_anchor` candidate pairs and orders each
/// so the candidate with the higher IoU to the anchor is the positive.
pub fn select_triples(
    dataset: &Dataset,
    per_anchor: usize,
    seed: u64,
    mode: IouMode,
) -> Result<Vec<Triple>> {
    let plans = dataset.plans();
    let ids: Vec<&str> = plans.iter().map(|p| p.id.as_str()).collect();
    select_triples_by(&ids, per_anchor, seed, |a, c| {
        plan_iou(&plans[a], &plans[c], mode)
    })
}

/// Triple selection over arbitrary ids with a caller-supplied similarity
/// (higher means more similar to the anchor).
pub fn select_triples_by(
    ids: &[&str],
    per_anchor: usize,
    seed: u64,
    mut similarity: impl FnMut(usize, usize) -> f64,
) -> Result<Vec<Triple>> {
    let n = ids.len();
    if n < 3 {
        return Err(Error::TooFewPlans(n));
    }
    if per_anchor == 0 {
        return Err(Error::InvalidParameter("per_anchor must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = Vec::with_capacity(n * per_anchor);
    for anchor in 0..n {
        for _ in 0..per_anchor {
            // two distinct candidates, uniform over the other n - 1 plans
            let mut first = rng.gen_range(0..n - 1);
            if first >= anchor {
                first += 1;
            }
            let mut second = rng.gen_range(0..n - 2);
            let (lo, hi) = (anchor.min(first), anchor.max(first));
            if second >= lo {
                second += 1;
            }
            if second >= hi {
                second += 1;
            }
            let s1 = similarity(anchor, first);
            let s2 = similarity(anchor, second);
            let first_wins = s1 > s2 || (s1 == s2 && ids[first] < ids[second]);
            let (positive, negative) = if first_wins {
                (first, second)
            } else {
                (second, first)
            };
            triples.push(Triple {
                anchor: ids[anchor].to_string(),
                positive: ids[positive].to_string(),
                negative: ids[negative].to_string(),
            });
        }
    }
    Ok(triples)
}

fn ordered(i: &str, j: &str) -> (String, String) {
    if i <= j {
        (i.to_string(), j.to_string())
    } else {
        (j.to_string(), i.to_string())
    }
}

/// Sparse symmetric map from unordered id pairs to target distances.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DistanceTable {
    universe: BTreeSet<String>,
    entries: BTreeMap<(String, String), f64>,
}

impl DistanceTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_universe<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        DistanceTable {
            universe: ids.into_iter().map(Into::into).collect(),
            entries: BTreeMap::new(),
        }
    }

    /// Adds or replaces the entry for `{i, j}`; both ids join the universe.
    pub fn insert(&mut self, i: &str, j: &str, dist: f64) -> Result<()> {
        if i == j {
            return Err(Error::SelfPair(i.to_string()));
        }
        if !dist.is_finite() {
            return Err(Error::NonFinite(i.to_string(), j.to_string()));
        }
        if !(0.0..=MAX_DISTANCE).contains(&dist) {
            return Err(Error::DistanceRange {
                i: i.to_string(),
                j: j.to_string(),
                dist,
            });
        }
        let key = ordered(i, j);
        self.universe.insert(key.0.clone());
        self.universe.insert(key.1.clone());
        self.entries.insert(key, dist);
        Ok(())
    }

    pub fn add_ids<I, S>(&mut self, ids: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.universe.extend(ids.into_iter().map(Into::into));
    }

    pub fn get(&self, i: &str, j: &str) -> Option<f64> {
        self.entries.get(&ordered(i, j)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn universe(&self) -> &BTreeSet<String> {
        &self.universe
    }

    /// Entries sorted by `(i, j)` with `i < j`.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.entries
            .iter()
            .map(|((i, j), d)| (i.as_str(), j.as_str(), *d))
    }

    pub fn mean_distance(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.values().sum::<f64>() / self.entries.len() as f64
    }
}

/// Evaluates `oracle` once per distinct unordered pair, in sorted pair order.
pub fn build_distance_table<'a, I, F>(
    universe: &BTreeSet<String>,
    pairs: I,
    mut oracle: F,
) -> Result<DistanceTable>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
    F: FnMut(&str, &str) -> Result<f64>,
{
    let mut distinct = BTreeSet::new();
    for (i, j) in pairs {
        for id in [i, j] {
            if !universe.contains(id) {
                return Err(Error::UnknownId(id.to_string()));
            }
        }
        if i == j {
            return Err(Error::SelfPair(i.to_string()));
        }
        distinct.insert(ordered(i, j));
    }
    let mut table = DistanceTable::with_universe(universe.iter().cloned());
    for (i, j) in distinct {
        let attach = |source: Error| Error::Oracle {
            i: i.clone(),
            j: j.clone(),
            source: Box::new(source),
        };
        let dist = oracle(&i, &j).map_err(attach)?;
        table.insert(&i, &j, dist).map_err(attach)?;
    }
    Ok(table)
}

pub fn table_to_tsv(table: &DistanceTable) -> String {
    let mut text = String::with_capacity(table.len() * 32);
    for (i, j, d) in table.iter() {
        text.push_str(i);
        text.push('\t');
        text.push_str(j);
        text.push('\t');
        text.push_str(&format_float(d));
        text.push('\n');
    }
    text
}

pub fn write_table(table: &DistanceTable, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), table_to_tsv(table).as_bytes())
}

pub fn parse_table(text: &str, path: &Path) -> Result<DistanceTable> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut table = DistanceTable::new();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [i, j, dist] = fields[..] else {
            return Err(parse_err(
                lineno,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        };
        if i.is_empty() || j.is_empty() {
            return Err(parse_err(lineno, "empty id".into()));
        }
        let dist: f64 = dist
            .trim()
            .parse()
            .map_err(|e| parse_err(lineno, format!("bad distance \"{dist}\": {e}")))?;
        if table.get(i, j).is_some() {
            return Err(parse_err(lineno, format!("duplicate pair ({i}, {j})")));
        }
        table
            .insert(i, j, dist)
            .map_err(|e| parse_err(lineno, e.to_string()))?;
    }
    Ok(table)
}

pub fn read_table(path: impl AsRef<Path>) -> Result<DistanceTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{rasterize, Category, Room};

    fn unit(k: usize, sign: f64) -> Vec<f64> {
        let mut v = vec![0.0; FEATURE_LEN];
        v[k] = sign;
        v
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_distance(&unit(0, 1.0), &unit(0, 1.0)).unwrap(), 0.0);
        assert_eq!(cosine_distance(&unit(0, 1.0), &unit(1, 1.0)).unwrap(), 1.0);
        assert_eq!(cosine_distance(&unit(0, 1.0), &unit(0, -1.0)).unwrap(), 2.0);
        assert!(matches!(
            cosine_distance(&unit(0, 1.0), &vec![0.0; FEATURE_LEN]),
            Err(Error::ZeroNorm(_))
        ));
        assert!(FeatureVector::new("z", vec![0.0; FEATURE_LEN]).is_err());
        assert!(FeatureVector::new("s", vec![1.0; 3]).is_err());
    }

    fn raster_with(cells: &[(usize, usize, u8)]) -> Raster {
        let mut r = Raster::empty(256);
        for &(x, y, c) in cells {
            r.set(x, y, c);
        }
        r
    }

    #[test]
    fn iou_examples() {
        let l = Category::Living.label();
        let a = raster_with(&[(0, 0, l), (1, 0, l), (0, 1, l), (1, 1, l)]);
        let b = raster_with(&[(0, 0, l), (1, 0, l)]);
        assert_eq!(iou(&a, &b, IouMode::Category).unwrap(), 0.5);
        assert_eq!(iou_distance(&a, &b, IouMode::Category).unwrap(), 0.5);
        assert_eq!(iou(&a, &a, IouMode::Category).unwrap(), 1.0);
        assert_eq!(iou_distance(&a, &a, IouMode::Category).unwrap(), 0.0);

        let c = raster_with(&[(10, 10, l)]);
        assert_eq!(iou(&a, &c, IouMode::Category).unwrap(), 0.0);
        assert_eq!(iou_distance(&a, &c, IouMode::Category).unwrap(), 1.0);

        let e = Raster::empty(256);
        assert_eq!(iou(&e, &e, IouMode::Category).unwrap(), 1.0);
        assert!(matches!(
            iou(&e, &Raster::empty(64), IouMode::Category),
            Err(Error::ResolutionMismatch(256, 64))
        ));
    }

    #[test]
    fn occupancy_ignores_labels() {
        let a = raster_with(&[(0, 0, 1), (1, 0, 1)]);
        let b = raster_with(&[(0, 0, 2), (1, 0, 1)]);
        assert_eq!(iou(&a, &b, IouMode::Category).unwrap(), 0.5);
        assert_eq!(iou(&a, &b, IouMode::Occupancy).unwrap(), 1.0);
    }

    #[test]
    fn plan_iou_matches_raster_route() {
        let a = FloorPlan::new(
            "a",
            vec![
                Room::new(Category::Living, 0, 0, 100, 120),
                Room::new(Category::Kitchen, 100, 0, 180, 60),
            ],
        );
        let b = FloorPlan::new(
            "b",
            vec![
                Room::new(Category::Living, 20, 10, 90, 200),
                Room::new(Category::Bedroom, 90, 10, 256, 70),
            ],
        );
        for mode in [IouMode::Category, IouMode::Occupancy] {
            let raster = iou(&rasterize(&a, 256), &rasterize(&b, 256), mode).unwrap();
            assert_eq!(plan_iou(&a, &b, mode).to_bits(), raster.to_bits());
        }
    }

    #[test]
    fn triples_follow_similarity() {
        let ids = ["A", "B", "C"];
        let sim = |a: usize, c: usize| match (a, c) {
            (0, 1) => 0.8,
            (0, 2) => 0.2,
            _ => 0.5,
        };
        let t = select_triples_by(&ids, 1, 3, sim).unwrap();
        assert_eq!(
            t[0],
            Triple {
                anchor: "A".into(),
                positive: "B".into(),
                negative: "C".into()
            }
        );

        // ties go to the smaller id
        let t = select_triples_by(&ids, 4, 11, |_, _| 0.5).unwrap();
        assert!(t
            .iter()
            .filter(|t| t.anchor == "A")
            .all(|t| t.positive == "B" && t.negative == "C"));

        let again = select_triples_by(&ids, 4, 11, |_, _| 0.5).unwrap();
        assert_eq!(t, again);
        assert!(matches!(
            select_triples_by(&ids[..2], 1, 0, |_, _| 0.0),
            Err(Error::TooFewPlans(2))
        ));
    }

    #[test]
    fn table_dedups_pairs() {
        let universe: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let mut calls = 0;
        let table = build_distance_table(
            &universe,
            [("a", "b"), ("b", "a"), ("a", "b")],
            |_, _| {
                calls += 1;
                Ok(0.25)
            },
        )
        .unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(calls, 1);

        let empty = build_distance_table(&universe, [], |_, _| Ok(0.0)).unwrap();
        assert!(empty.is_empty());

        let err = build_distance_table(&universe, [("a", "q")], |_, _| Ok(0.0)).unwrap_err();
        assert!(matches!(err, Error::UnknownId(id) if id == "q"));

        let err = build_distance_table(&universe, [("b", "a")], |_, _| {
            Err(Error::ZeroNorm("b".into()))
        })
        .unwrap_err();
        assert!(matches!(err, Error::Oracle { ref i, ref j, .. } if i == "a" && j == "b"));
    }

    #[test]
    fn table_lines() {
        let p = Path::new("distances.tsv");
        let t = parse_table("a\tb\t0.5\n", p).unwrap();
        assert_eq!(t.get("b", "a"), Some(0.5));

        let err = parse_table("a\tb\t0.5\na\ta\t0.0\n", p).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("self-pair"), "{message}");
            }
            other => panic!("{other}"),
        }
        assert!(matches!(parse_table("a\tb\t2.5\n", p), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_table("a\tb\n", p), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_table("a\tb\tx\n", p), Err(Error::Parse { .. })));
    }

    #[test]
    fn table_round_trip() {
        let mut t = DistanceTable::new();
        let ids = ["a", "b", "c", "d"];
        let mut v = 0.1;
        for x in 0..4 {
            for y in x + 1..4 {
                t.insert(ids[y], ids[x], v).unwrap();
                v += 0.13;
            }
        }
        assert_eq!(t.len(), 6);
        let text = table_to_tsv(&t);
        assert!(text.starts_with("a\tb\t"));
        assert_eq!(parse_table(&text, Path::new("x")).unwrap(), t);
    }
}
