//! HTTP service over a solved workspace.
//!
//! Reads are served from an immutable [`Snapshot`] behind an `Arc`; a request
//! clones the pointer once and never observes a later version. Inserts are
//! queued on a single writer, which builds the next snapshot, persists it and
//! swaps the pointer.

mod routes;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use planspace::workspace::{CLUSTERS, EMBEDDING, PLANS};
use planspace::{
    load_dataset, read_embedding, read_labels, ClusterAssignment, Dataset, Embedding, SolverConfig,
    SpatialIndex, Workspace,
};

pub use routes::router;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_DIM: usize = 3;

/// One published version of the served state.
pub struct Snapshot {
    pub version: u64,
    pub dataset: Dataset,
    pub embedding: Embedding,
    pub index: SpatialIndex,
    /// Labels loaded from `clusters.tsv`, if the workspace had one.
    pub labels: Option<BTreeMap<String, usize>>,
    clusters: Mutex<HashMap<(usize, u64), Arc<ClusterAssignment>>>,
}

impl Snapshot {
    pub fn new(
        version: u64,
        dataset: Dataset,
        embedding: Embedding,
        labels: Option<BTreeMap<String, usize>>,
    ) -> Self {
        let index = SpatialIndex::build(&embedding);
        Snapshot {
            version,
            dataset,
            embedding,
            index,
            labels,
            clusters: Mutex::new(HashMap::new()),
        }
    }

    /// k-means over this version's embedding, computed once per `(k, seed)`.
    pub fn clusters(&self, k: usize, seed: u64) -> planspace::Result<Arc<ClusterAssignment>> {
        if let Some(hit) = self.clusters.lock().unwrap().get(&(k, seed)) {
            return Ok(hit.clone());
        }
        let fresh = Arc::new(planspace::kmeans(
            &self.embedding,
            k,
            seed,
            planspace::cluster::DEFAULT_MAX_ITERS,
        )?);
        Ok(self
            .clusters
            .lock()
            .unwrap()
            .entry((k, seed))
            .or_insert(fresh)
            .clone())
    }
}

struct Shared {
    current: RwLock<Arc<Snapshot>>,
    /// Held for the whole of an insert; the value is the next `u-<n>` counter.
    writer: tokio::sync::Mutex<u64>,
    /// Where inserts are persisted; `None` keeps everything in memory.
    workspace: Option<Workspace>,
    solver: SolverConfig,
}

#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

impl AppState {
    pub fn new(snapshot: Snapshot, workspace: Option<Workspace>) -> Self {
        let next = next_user_id(&snapshot.dataset);
        AppState {
            shared: Arc::new(Shared {
                current: RwLock::new(Arc::new(snapshot)),
                writer: tokio::sync::Mutex::new(next),
                workspace,
                solver: SolverConfig::default(),
            }),
        }
    }

    /// Loads `plans.json` and, when present, `embedding.tsv` and `clusters.tsv`.
    pub fn load(workspace: Workspace) -> planspace::Result<Self> {
        let dataset = load_dataset(workspace.path(PLANS))?;
        let embedding = if workspace.has(EMBEDDING) {
            read_embedding(workspace.path(EMBEDDING))?
        } else {
            Embedding::new(DEFAULT_DIM, 0)
        };
        for id in embedding.ids() {
            if !dataset.contains(id) {
                return Err(planspace::Error::UnknownId(id.clone()));
            }
        }
        let labels = if workspace.has(CLUSTERS) {
            Some(read_labels(workspace.path(CLUSTERS))?)
        } else {
            None
        };
        Ok(AppState::new(Snapshot::new(1, dataset, embedding, labels), Some(workspace)))
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.shared.current.read().unwrap().clone()
    }

    fn publish(&self, snapshot: Snapshot) {
        *self.shared.current.write().unwrap() = Arc::new(snapshot);
    }
}

/// Smallest n such that no existing id is `u-<m>` with m ≥ n.
fn next_user_id(dataset: &Dataset) -> u64 {
    dataset
        .plans()
        .iter()
        .filter_map(|p| p.id.strip_prefix("u-")?.parse::<u64>().ok())
        .max()
        .map_or(1, |m| m + 1)
}

pub struct ServeConfig {
    pub workspace: Workspace,
    pub host: String,
    pub port: u16,
    /// Static files for the browser client; defaults to `<workspace>/ui`.
    pub ui_dir: Option<PathBuf>,
}

pub async fn serve(config: ServeConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let ui = config
        .ui_dir
        .clone()
        .unwrap_or_else(|| config.workspace.path("ui"));
    let state = AppState::load(config.workspace)?;
    let app = router(state, Some(ui.as_path()));
    let addr: SocketAddr = format!("{}:{}", config.host, config.port).parse()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn ui_exists(dir: Option<&Path>) -> Option<&Path> {
    dir.filter(|d| d.is_dir())
}
