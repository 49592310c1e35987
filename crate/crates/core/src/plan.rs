//! Floor plans, the dataset interchange format and rasterization.
//!
//! A plan is a set of categorized, axis-aligned, non-overlapping rooms on a
//! 256×256 canvas. Boxes are half-open: `[x0, x1) × [y0, y1)`.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CANVAS: i64 = 256;
pub const DEFAULT_RESOLUTION: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Category {
    Living = 1,
    Bedroom = 2,
    Kitchen = 3,
    Bathroom = 4,
    Balcony = 5,
    Storage = 6,
    Corridor = 7,
    Other = 8,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Living,
        Category::Bedroom,
        Category::Kitchen,
        Category::Bathroom,
        Category::Balcony,
        Category::Storage,
        Category::Corridor,
        Category::Other,
    ];

    /// Raster label; 0 is reserved for empty cells.
    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn from_label(label: u8) -> Option<Category> {
        Category::ALL.get(usize::from(label).checked_sub(1)?).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Living => "living",
            Category::Bedroom => "bedroom",
            Category::Kitchen => "kitchen",
            Category::Bathroom => "bathroom",
            Category::Balcony => "balcony",
            Category::Storage => "storage",
            Category::Corridor => "corridor",
            Category::Other => "other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown room category \"{s}\""))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Room {
    pub category: Category,
    #[serde(rename = "box")]
    pub bbox: [i64; 4],
}

impl Room {
    pub fn new(category: Category, x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        Room {
            category,
            bbox: [x0, y0, x1, y1],
        }
    }

    pub fn area(&self) -> i64 {
        let [x0, y0, x1, y1] = self.bbox;
        (x1 - x0).max(0) * (y1 - y0).max(0)
    }

    pub fn intersection_area(&self, other: &Room) -> i64 {
        let [ax0, ay0, ax1, ay1] = self.bbox;
        let [bx0, by0, bx1, by1] = other.bbox;
        let w = ax1.min(bx1) - ax0.max(bx0);
        let h = ay1.min(by1) - ay0.max(by0);
        w.max(0) * h.max(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FloorPlan {
    pub id: String,
    pub rooms: Vec<Room>,
}

impl FloorPlan {
    pub fn new(id: impl Into<String>, rooms: Vec<Room>) -> Self {
        FloorPlan {
            id: id.into(),
            rooms,
        }
    }
}

/// Every violated plan invariant, with room indices. Empty means valid.
pub fn validate_plan(plan: &FloorPlan) -> Vec<String> {
    let mut violations = Vec::new();
    if plan.id.is_empty() {
        violations.push("empty id".to_string());
    }
    if plan.rooms.is_empty() {
        violations.push("empty plan".to_string());
    }
    for (k, room) in plan.rooms.iter().enumerate() {
        let [x0, y0, x1, y1] = room.bbox;
        if x0 >= x1 || y0 >= y1 {
            violations.push(format!("degenerate box at room {k}"));
        }
        if x0 < 0 || y0 < 0 || x1 > CANVAS || y1 > CANVAS {
            violations.push(format!("box outside canvas at room {k}"));
        }
    }
    for a in 0..plan.rooms.len() {
        for b in a + 1..plan.rooms.len() {
            let overlap = plan.rooms[a].intersection_area(&plan.rooms[b]);
            if overlap > 0 {
                violations.push(format!(
                    "rooms {a} and {b} overlap (intersection area {overlap})"
                ));
            }
        }
    }
    violations
}

pub fn check_plan(plan: &FloorPlan) -> Result<()> {
    let violations = validate_plan(plan);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidPlan {
            id: plan.id.clone(),
            violations,
        })
    }
}

/// An ordered collection of validated plans with unique ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    plans: Vec<FloorPlan>,
}

impl Dataset {
    pub fn new(plans: Vec<FloorPlan>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(plans.len());
        for plan in &plans {
            check_plan(plan)?;
            if !seen.insert(plan.id.as_str()) {
                return Err(Error::DuplicateId(plan.id.clone()));
            }
        }
        Ok(Dataset { plans })
    }

    pub fn plans(&self) -> &[FloorPlan] {
        &self.plans
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&FloorPlan> {
        self.plans.iter().find(|p| p.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn push(&mut self, plan: FloorPlan) -> Result<()> {
        check_plan(&plan)?;
        if self.contains(&plan.id) {
            return Err(Error::DuplicateId(plan.id));
        }
        self.plans.push(plan);
        Ok(())
    }

    pub fn into_plans(self) -> Vec<FloorPlan> {
        self.plans
    }
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let plans: Vec<FloorPlan> = serde_json::from_str(text).map_err(|e| Error::PlansFormat {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Dataset::new(plans)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}

pub fn dataset_to_json(dataset: &Dataset) -> String {
    let mut text = serde_json::to_string_pretty(dataset.plans()).expect("plans serialize");
    text.push('\n');
    text
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), dataset_to_json(dataset).as_bytes())
}

/// A square grid of category labels, row-major, label 0 = empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Raster {
    resolution: usize,
    cells: Vec<u8>,
}

impl Raster {
    pub fn empty(resolution: usize) -> Self {
        Raster {
            resolution,
            cells: vec![0; resolution * resolution],
        }
    }

    pub fn from_cells(resolution: usize, cells: Vec<u8>) -> Result<Self> {
        if cells.len() != resolution * resolution {
            return Err(Error::InvalidParameter(format!(
                "raster of resolution {resolution} needs {} cells, got {}",
                resolution * resolution,
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|&&c| c != 0 && Category::from_label(c).is_none()) {
            return Err(Error::InvalidParameter(format!("invalid raster label {bad}")));
        }
        Ok(Raster { resolution, cells })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.cells[y * self.resolution + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        self.cells[y * self.resolution + x] = label;
    }

    pub fn empty_cells(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 0).count()
    }

    /// Cell count per label, index 0 = empty.
    pub fn histogram(&self) -> [usize; 9] {
        let mut counts = [0usize; 9];
        for &c in &self.cells {
            counts[usize::from(c)] += 1;
        }
        counts
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.cells.chunks(self.resolution.max(1))
    }
}

/// Paints each room onto a `resolution`² grid. Canvas coordinates are scaled
/// by `resolution / 256` with floor rounding.
pub fn rasterize(plan: &FloorPlan, resolution: usize) -> Raster {
    let mut raster = Raster::empty(resolution);
    let res = resolution as i64;
    let scale = |v: i64| -> usize { (v.clamp(0, CANVAS) * res / CANVAS) as usize };
    for room in &plan.rooms {
        let [x0, y0, x1, y1] = room.bbox;
        let (x0, x1) = (scale(x0), scale(x1));
        let (y0, y1) = (scale(y0), scale(y1));
        let label = room.category.label();
        for y in y0..y1 {
            raster.cells[y * resolution + x0..y * resolution + x1].fill(label);
        }
    }
    raster
}

#[cfg(test)]
mod tests {
    use super::*;

    fn living(x0: i64, y0: i64, x1: i64, y1: i64) -> Room {
        Room::new(Category::Living, x0, y0, x1, y1)
    }

    #[test]
    fn minimal_dataset_parses() {
        let text = r#"[{"id":"a","rooms":[{"category":"living","box":[0,0,256,256]}]}]"#;
        let ds = parse_dataset(text, Path::new("plans.json")).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.plans()[0].rooms[0], living(0, 0, 256, 256));
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = r#"[{"id":"a","rooms":[{"category":"living","box":[0,0,10,10]}]},
                       {"id":"a","rooms":[{"category":"kitchen","box":[0,0,10,10]}]}]"#;
        let err = parse_dataset(text, Path::new("plans.json")).unwrap_err();
        assert!(matches!(&err, Error::DuplicateId(id) if id == "a"), "{err}");
    }

    #[test]
    fn overlap_reports_area() {
        let plan = FloorPlan::new("p", vec![living(0, 0, 100, 100), living(50, 50, 150, 150)]);
        let v = validate_plan(&plan);
        assert_eq!(v, vec!["rooms 0 and 1 overlap (intersection area 2500)"]);
        let err = Dataset::new(vec![plan]).unwrap_err();
        assert!(err.to_string().contains("\"p\""));
    }

    #[test]
    fn violations() {
        assert!(validate_plan(&FloorPlan::new("a", vec![living(0, 0, 256, 256)])).is_empty());
        assert_eq!(
            validate_plan(&FloorPlan::new("a", vec![living(3, 0, 3, 10)])),
            vec!["degenerate box at room 0"]
        );
        assert_eq!(validate_plan(&FloorPlan::new("a", vec![])), vec!["empty plan"]);
        assert_eq!(
            validate_plan(&FloorPlan::new("a", vec![living(-1, 0, 3, 10)])),
            vec!["box outside canvas at room 0"]
        );
    }

    #[test]
    fn unknown_category_is_a_parse_error() {
        let text = r#"[{"id":"a","rooms":[{"category":"garage","box":[0,0,10,10]}]}]"#;
        assert!(matches!(
            parse_dataset(text, Path::new("x")),
            Err(Error::PlansFormat { .. })
        ));
    }

    #[test]
    fn rasterize_counts_area() {
        let plan = FloorPlan::new("a", vec![living(0, 0, 128, 128)]);
        let r = rasterize(&plan, 256);
        assert_eq!(r.histogram()[Category::Living.label() as usize], 16384);
        assert_eq!(r.empty_cells(), 256 * 256 - 16384);
        assert_eq!(r, rasterize(&plan, 256));

        let full = FloorPlan::new("b", vec![living(0, 0, 256, 256)]);
        assert_eq!(rasterize(&full, 256).empty_cells(), 0);
    }

    #[test]
    fn rasterize_scales_with_floor() {
        let plan = FloorPlan::new("a", vec![living(0, 0, 3, 256), living(3, 0, 256, 256)]);
        let r = rasterize(&plan, 64);
        assert_eq!(r.resolution(), 64);
        // 3 * 64 / 256 floors to 0: first room vanishes
        assert_eq!(r.empty_cells(), 0);
        assert_eq!(r.get(0, 0), Category::Living.label());
    }

    #[test]
    fn category_roundtrip() {
        for c in Category::ALL {
            assert_eq!(Category::from_label(c.label()), Some(c));
            assert_eq!(c.as_str().parse::<Category>().unwrap(), c);
        }
        assert_eq!(Category::from_label(0), None);
        assert_eq!(Category::from_label(9), None);
    }
}
