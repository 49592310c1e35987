//! Python bindings. Plans cross the boundary as JSON text, distances and
//! coordinates as plain lists and dicts.

use std::collections::BTreeMap;
use std::path::Path;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use planspace::plan::parse_dataset;
use planspace::{IouMode, Order, SolverConfig};

fn err(e: planspace::Error) -> PyErr {
    match e {
        planspace::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_order(order: &str) -> PyResult<Order> {
    order.parse().map_err(PyValueError::new_err)
}

fn parse_mode(mode: &str) -> PyResult<IouMode> {
    match mode {
        "category" => Ok(IouMode::Category),
        "occupancy" => Ok(IouMode::Occupancy),
        other => Err(PyValueError::new_err(format!(
            "unknown iou mode \"{other}\" (expected category|occupancy)"
        ))),
    }
}

fn dataset(plans_json: &str) -> PyResult<planspace::Dataset> {
    parse_dataset(plans_json, Path::new("<json>")).map_err(err)
}

/// One plan from a JSON object, checked against the plan invariants.
fn plan(plan_json: &str) -> PyResult<planspace::FloorPlan> {
    let plan = dataset(&format!("[{plan_json}]"))?.into_plans().remove(0);
    planspace::check_plan(&plan).map_err(err)?;
    Ok(plan)
}

fn solver_config(seed: u64, restarts: usize, max_iterations: usize) -> SolverConfig {
    SolverConfig {
        seed,
        restarts,
        max_iterations,
        ..SolverConfig::default()
    }
}

fn report_dict<'py>(py: Python<'py>, report: &planspace::SolveReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("initial_stress", report.initial_stress)?;
    d.set_item("final_stress", report.final_stress)?;
    d.set_item("iterations", report.iterations)?;
    d.set_item("termination", format!("{:?}", report.termination).to_lowercase())?;
    d.set_item("converged", report.converged())?;
    d.set_item("restart", report.restart)?;
    d.set_item("wall_time_secs", report.wall_time_secs)?;
    Ok(d)
}

/// Sparse symmetric table of pairwise distances.
#[pyclass(name = "DistanceTable")]
struct PyDistanceTable {
    inner: planspace::DistanceTable,
}

#[pymethods]
impl PyDistanceTable {
    #[new]
    #[pyo3(signature = (ids=None))]
    fn new(ids: Option<Vec<String>>) -> Self {
        PyDistanceTable {
            inner: planspace::DistanceTable::with_universe(ids.unwrap_or_default()),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyDistanceTable {
            inner: planspace::read_table(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        planspace::write_table(&self.inner, path).map_err(err)
    }

    fn insert(&mut self, i: &str, j: &str, distance: f64) -> PyResult<()> {
        self.inner.insert(i, j, distance).map_err(err)
    }

    fn get(&self, i: &str, j: &str) -> Option<f64> {
        self.inner.get(i, j)
    }

    fn entries(&self) -> Vec<(String, String, f64)> {
        self.inner
            .iter()
            .map(|(i, j, d)| (i.to_string(), j.to_string(), d))
            .collect()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.universe().iter().cloned().collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Embedded coordinates with a spatial index for neighbour queries.
#[pyclass(name = "Embedding")]
struct PyEmbedding {
    inner: planspace::Embedding,
    index: planspace::SpatialIndex,
}

impl PyEmbedding {
    fn wrap(inner: planspace::Embedding) -> Self {
        let index = planspace::SpatialIndex::build(&inner);
        PyEmbedding { inner, index }
    }
}

#[pymethods]
impl PyEmbedding {
    #[new]
    #[pyo3(signature = (ids, coords, seed=0))]
    fn new(ids: Vec<String>, coords: Vec<Vec<f64>>, seed: u64) -> PyResult<Self> {
        let dim = coords.first().map_or(1, Vec::len);
        if coords.iter().any(|c| c.len() != dim) {
            return Err(PyValueError::new_err("coordinates must share one dimension"));
        }
        let flat = coords.into_iter().flatten().collect();
        let inner = planspace::Embedding::from_parts(dim, seed, ids, flat).map_err(err)?;
        Ok(PyEmbedding::wrap(inner))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyEmbedding::wrap(planspace::read_embedding(path).map_err(err)?))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        planspace::write_embedding(&self.inner, path).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids().to_vec()
    }

    fn coords(&self) -> Vec<Vec<f64>> {
        self.inner.iter().map(|(_, c)| c.to_vec()).collect()
    }

    fn get(&self, id: &str) -> Option<Vec<f64>> {
        self.inner.get(id).map(<[f64]>::to_vec)
    }

    /// The `k` points nearest to (or farthest from) `query`, ties broken by id.
    #[pyo3(signature = (query, k, order="nearest", exclude=None))]
    fn knn(&self, query: Vec<f64>, k: usize, order: &str, exclude: Option<&str>) -> PyResult<Vec<(String, f64)>> {
        let hits = self
            .index
            .query(&query, k, parse_order(order)?, exclude)
            .map_err(err)?;
        Ok(hits.into_iter().map(|n| (n.id, n.distance)).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Cosine distance `1 - cos(u, v)`, in `[0, 2]`.
#[pyfunction]
fn cosine_distance(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    planspace::cosine_distance(&u, &v).map_err(err)
}

/// `1 - IoU` between two plans given as JSON objects.
#[pyfunction]
#[pyo3(signature = (a, b, mode="category"))]
fn iou_distance(a: &str, b: &str, mode: &str) -> PyResult<f64> {
    Ok(planspace::plan_iou_distance(&plan(a)?, &plan(b)?, parse_mode(mode)?))
}

/// Fits coordinates to the table; returns the embedding and a report dict.
#[pyfunction]
#[pyo3(signature = (table, dim=3, seed=0, restarts=1, max_iterations=500))]
fn solve<'py>(
    py: Python<'py>,
    table: &PyDistanceTable,
    dim: usize,
    seed: u64,
    restarts: usize,
    max_iterations: usize,
) -> PyResult<(PyEmbedding, Bound<'py, PyDict>)> {
    let config = solver_config(seed, restarts, max_iterations);
    let (emb, report) = py
        .detach(|| planspace::solve_embedding(&table.inner, dim, &config))
        .map_err(err)?;
    Ok((PyEmbedding::wrap(emb), report_dict(py, &report)?))
}

/// Places one new point against fixed anchors; returns `(coordinate, stress)`.
#[pyfunction]
#[pyo3(signature = (embedding, distances, seed=0, restarts=1))]
fn insert(
    py: Python<'_>,
    embedding: &PyEmbedding,
    distances: BTreeMap<String, f64>,
    seed: u64,
    restarts: usize,
) -> PyResult<(Vec<f64>, f64)> {
    let config = solver_config(seed, restarts, SolverConfig::default().max_iterations);
    let (coord, report) = py
        .detach(|| planspace::insert_point(&embedding.inner, &distances, &config))
        .map_err(err)?;
    Ok((coord, report.final_stress))
}

/// k-means labels keyed by id.
#[pyfunction]
#[pyo3(signature = (embedding, k, seed=0, max_iterations=100))]
fn kmeans(embedding: &PyEmbedding, k: usize, seed: u64, max_iterations: usize) -> PyResult<BTreeMap<String, usize>> {
    let result = planspace::kmeans(&embedding.inner, k, seed, max_iterations).map_err(err)?;
    Ok(result.ids.into_iter().zip(result.labels).collect())
}

/// Near-duplicate groups as `(representative, members)` pairs.
#[pyfunction]
#[pyo3(signature = (plans, threshold=50, resolution=256))]
fn prune(py: Python<'_>, plans: &str, threshold: usize, resolution: usize) -> PyResult<Vec<(String, Vec<String>)>> {
    let ds = dataset(plans)?;
    let groups = py
        .detach(|| planspace::prune_redundant(&ds, threshold, resolution))
        .map_err(err)?;
    Ok(groups.into_iter().map(|g| (g.representative, g.members)).collect())
}

#[pymodule]
#[pyo3(name = "planspace")]
fn planspace_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistanceTable>()?;
    m.add_class::<PyEmbedding>()?;
    m.add_function(wrap_pyfunction!(cosine_distance, m)?)?;
    m.add_function(wrap_pyfunction!(iou_distance, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(insert, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(prune, m)?)?;
    Ok(())
}
