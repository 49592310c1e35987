//! Places floor plans in a low-dimensional space whose Euclidean distances
//! reproduce pairwise similarity scores, and answers similarity search,
//! clustering and deduplication queries over that space.
//!
//! The pipeline: [`distance`] turns feature vectors or rasterized plans into a
//! sparse [`DistanceTable`]; [`solver`] fits coordinates to it; [`index`],
//! [`cluster`] and [`prune`] explore the result.

pub mod cluster;
pub mod distance;
pub mod embedding;
pub mod error;
pub mod index;
pub mod io;
mod linalg;
pub mod plan;
pub mod procrustes;
pub mod prune;
pub mod solver;
pub mod synth;
pub mod workspace;

pub use cluster::{kmeans, read_labels, ClusterAssignment};
pub use distance::{
    build_distance_table, cosine_distance, iou, iou_distance, plan_iou, plan_iou_distance,
    read_table, select_triples, write_table, DistanceTable, FeatureVector, IouMode, Triple,
};
pub use embedding::{read_embedding, write_embedding, Embedding};
pub use error::{Error, Result};
pub use index::{scan, Neighbor, Order, SpatialIndex};
pub use plan::{check_plan, load_dataset, rasterize, save_dataset, validate_plan, Category, Dataset, FloorPlan, Raster, Room};
pub use procrustes::{procrustes_align, procrustes_fit, RigidTransform};
pub use prune::{pixel_diff, prune_redundant, RedundancyGroup};
pub use workspace::Workspace;
pub use solver::{insert_point, residuals_and_jacobian, solve_embedding, stress, SolveReport, SolverConfig, Termination};
