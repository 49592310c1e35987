use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::plan::{rasterize, Dataset, Raster};

pub const DEFAULT_THRESHOLD: usize = 50;

/// Number of cells whose labels differ.
pub fn pixel_diff(a: &Raster, b: &Raster) -> Result<usize> {
    if a.resolution() != b.resolution() {
        return Err(Error::ResolutionMismatch(a.resolution(), b.resolution()));
    }
    Ok(a.cells().iter().zip(b.cells()).filter(|(x, y)| x != y).count())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RedundancyGroup {
    pub representative: String,
    /// Representative first, then members in dataset order.
    pub members: Vec<String>,
    /// Pixel diff of each member against the representative (0 for itself).
    pub diffs: Vec<usize>,
    pub max_pairwise_diff: usize,
}

impl RedundancyGroup {
    pub fn redundant(&self) -> usize {
        self.members.len() - 1
    }
}

pub fn redundant_count(groups: &[RedundancyGroup]) -> usize {
    groups.iter().map(RedundancyGroup::redundant).sum()
}

/// Greedy single pass in dataset order: each plan joins the first group whose
/// representative is within `threshold` differing cells, otherwise it founds
/// a new group. Only groups with two or more members are returned.
pub fn prune_redundant(dataset: &Dataset, threshold: usize, resolution: usize) -> Result<Vec<RedundancyGroup>> {
    struct Open {
        raster: Raster,
        members: Vec<(usize, usize)>,
    }
    let plans = dataset.plans();
    let mut groups: Vec<Open> = Vec::new();
    for (p, plan) in plans.iter().enumerate() {
        let raster = rasterize(plan, resolution);
        let mut joined = false;
        for group in groups.iter_mut() {
            let diff = pixel_diff(&group.raster, &raster)?;
            if diff <= threshold {
                group.members.push((p, diff));
                joined = true;
                break;
            }
        }
        if !joined {
            groups.push(Open {
                raster,
                members: vec![(p, 0)],
            });
        }
    }

    let mut out = Vec::new();
    for group in groups.into_iter().filter(|g| g.members.len() > 1) {
        let rasters: Vec<Raster> = group
            .members
            .iter()
            .map(|&(p, _)| rasterize(&plans[p], resolution))
            .collect();
        let mut max_pairwise = 0;
        for a in 0..rasters.len() {
            for b in a + 1..rasters.len() {
                max_pairwise = max_pairwise.max(pixel_diff(&rasters[a], &rasters[b])?);
            }
        }
        out.push(RedundancyGroup {
            representative: plans[group.members[0].0].id.clone(),
            members: group.members.iter().map(|&(p, _)| plans[p].id.clone()).collect(),
            diffs: group.members.iter().map(|&(_, d)| d).collect(),
            max_pairwise_diff: max_pairwise,
        });
    }
    Ok(out)
}

/// `representative_id` TAB `member_id` TAB `pixel_diff`, one line per
/// redundant member.
pub fn groups_to_tsv(groups: &[RedundancyGroup]) -> String {
    let mut text = String::new();
    for g in groups {
        for (member, diff) in g.members.iter().zip(&g.diffs).skip(1) {
            text.push_str(&format!("{}\t{member}\t{diff}\n", g.representative));
        }
    }
    text
}

pub fn write_groups(groups: &[RedundancyGroup], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), groups_to_tsv(groups).as_bytes())
}
