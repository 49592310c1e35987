//! File layout of a workspace directory.

use std::path::{Path, PathBuf};

pub const PLANS: &str = "plans.json";
pub const FEATURES: &str = "features.tsv";
pub const DISTANCES: &str = "distances.tsv";
pub const EMBEDDING: &str = "embedding.tsv";
pub const CLUSTERS: &str = "clusters.tsv";
pub const REDUNDANT: &str = "redundant.tsv";

/// Environment variable naming the default workspace directory.
pub const ENV_VAR: &str = "PLANSPACE_WORKSPACE";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Workspace {
    dir: PathBuf,
}

impl Workspace {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Workspace { dir: dir.into() }
    }

    /// `$PLANSPACE_WORKSPACE`, else the current directory.
    pub fn from_env() -> Self {
        match std::env::var_os(ENV_VAR) {
            Some(dir) if !dir.is_empty() => Workspace::new(dir),
            _ => Workspace::new("."),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn has(&self, file: &str) -> bool {
        self.path(file).is_file()
    }
}
