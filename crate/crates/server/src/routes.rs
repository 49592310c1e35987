use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use planspace::workspace::{EMBEDDING, PLANS};
use planspace::{
    insert_point, plan_iou_distance, rasterize, save_dataset, validate_plan, write_embedding, Category,
    FloorPlan, IouMode, Order, Room,
};

use crate::{ui_exists, AppState, Snapshot};

const MAX_PAGE_SIZE: usize = 1000;
const DEFAULT_K: usize = 10;

pub fn router(state: AppState, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/plans", get(list_plans).post(insert_plan))
        .route("/plans/{id}", get(get_plan))
        .route("/plans/{id}/similar", get(similar))
        .route("/plans/{id}/raster", get(raster))
        .route("/embedding", get(embedding))
        .route("/clusters", get(clusters))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "no such route") });
    let app = Router::new().nest("/api", api).with_state(state);
    match ui_exists(ui_dir) {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;
type Params = Query<HashMap<String, String>>;

fn param<T: FromStr>(params: &HashMap<String, String>, name: &str, default: T) -> Result<T, ApiError> {
    match params.get(name) {
        None => Ok(default),
        Some(raw) => raw
            .parse()
            .map_err(|_| ApiError::bad_request(format!("invalid {name}: \"{raw}\""))),
    }
}

fn positive(params: &HashMap<String, String>, name: &str, default: usize) -> Result<usize, ApiError> {
    let v = param(params, name, default)?;
    if v == 0 {
        return Err(ApiError::bad_request(format!("{name} must be at least 1")));
    }
    Ok(v)
}

fn find_plan<'a>(snap: &'a Snapshot, id: &str) -> Result<&'a FloorPlan, ApiError> {
    snap.dataset
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown plan id \"{id}\"")))
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    let snap = state.snapshot();
    Json(json!({
        "status": "ok",
        "version": snap.version,
        "plans": snap.dataset.len(),
        "points": snap.embedding.len(),
    }))
}

async fn list_plans(State(state): State<AppState>, Query(params): Params) -> ApiResult {
    let snap = state.snapshot();
    let page = positive(&params, "page", 1)?;
    let page_size = positive(&params, "page_size", 50)?;
    if page_size > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(format!("page_size must be at most {MAX_PAGE_SIZE}")));
    }
    let ids: Vec<&str> = snap
        .dataset
        .plans()
        .iter()
        .skip((page - 1).saturating_mul(page_size))
        .take(page_size)
        .map(|p| p.id.as_str())
        .collect();
    Ok(Json(json!({
        "version": snap.version,
        "page": page,
        "page_size": page_size,
        "total": snap.dataset.len(),
        "ids": ids,
    })))
}

async fn get_plan(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let snap = state.snapshot();
    let plan = find_plan(&snap, &id)?;
    let cluster = snap.labels.as_ref().and_then(|l| l.get(&id));
    Ok(Json(json!({
        "version": snap.version,
        "plan": plan,
        "coordinate": snap.embedding.get(&id),
        "cluster": cluster,
    })))
}

async fn similar(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(params): Params,
) -> ApiResult {
    let snap = state.snapshot();
    find_plan(&snap, &id)?;
    let k = positive(&params, "k", DEFAULT_K)?;
    let order: Order = match params.get("order") {
        None => Order::Nearest,
        Some(raw) => raw.parse().map_err(ApiError::bad_request)?,
    };
    let coord = snap
        .embedding
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("plan \"{id}\" has no coordinate")))?;
    let hits = snap
        .index
        .query(coord, k, order, Some(&id))
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let results: Vec<Value> = hits
        .into_iter()
        .map(|n| {
            let thumbnail = format!("/api/plans/{}/raster", n.id);
            json!({ "id": n.id, "distance": n.distance, "thumbnail": thumbnail })
        })
        .collect();
    Ok(Json(json!({
        "version": snap.version,
        "id": id,
        "k": k,
        "order": order,
        "results": results,
    })))
}

async fn raster(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(params): Params,
) -> ApiResult {
    let snap = state.snapshot();
    let plan = find_plan(&snap, &id)?;
    let resolution = positive(&params, "resolution", planspace::plan::DEFAULT_RESOLUTION)?;
    if resolution > planspace::plan::CANVAS as usize {
        return Err(ApiError::bad_request("resolution must be at most 256"));
    }
    let grid = rasterize(plan, resolution);
    let rows: Vec<&[u8]> = grid.rows().collect();
    let mut categories = vec!["empty"];
    categories.extend(Category::ALL.iter().map(|c| c.as_str()));
    Ok(Json(json!({
        "id": id,
        "resolution": resolution,
        "empty_cells": grid.empty_cells(),
        "categories": categories,
        "cells": rows,
    })))
}

async fn embedding(State(state): State<AppState>) -> Json<Value> {
    let snap = state.snapshot();
    let points: Vec<Value> = snap
        .embedding
        .iter()
        .map(|(id, c)| json!({ "id": id, "coordinate": c }))
        .collect();
    Json(json!({
        "version": snap.version,
        "dim": snap.embedding.dim(),
        "points": points,
    }))
}

async fn clusters(State(state): State<AppState>, Query(params): Params) -> ApiResult {
    let snap = state.snapshot();
    let k: usize = match params.get("k") {
        None => return Err(ApiError::bad_request("k is required")),
        Some(_) => positive(&params, "k", 1)?,
    };
    let seed: u64 = param(&params, "seed", 0)?;
    if k > snap.embedding.len() {
        return Err(ApiError::bad_request(format!(
            "k must be between 1 and {}",
            snap.embedding.len()
        )));
    }
    let worker = snap.clone();
    let assignment = tokio::task::spawn_blocking(move || worker.clusters(k, seed))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(json!({
        "version": snap.version,
        "k": k,
        "seed": seed,
        "ids": assignment.ids,
        "labels": assignment.labels,
        "centroids": assignment.centroids,
        "iterations": assignment.iterations,
        "inertia": assignment.inertia(),
    })))
}

/// Plan document accepted by `POST /api/plans`. A client-supplied id is
/// ignored; the server assigns `u-<n>`.
#[derive(Deserialize)]
struct PlanDocument {
    rooms: Vec<Room>,
}

async fn insert_plan(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let doc: PlanDocument = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("malformed plan document: {e}")))?;
    let draft = FloorPlan::new("u-new", doc.rooms);
    let violations = validate_plan(&draft);
    if !violations.is_empty() {
        return Err(ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({ "error": "invalid plan", "violations": violations }),
        });
    }

    let mut counter = state.shared.writer.lock().await;
    let base = state.snapshot();
    if base.embedding.is_empty() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "no embedded plans to insert against",
        ));
    }
    let mut id = format!("u-{}", *counter);
    while base.dataset.contains(&id) {
        *counter += 1;
        id = format!("u-{}", *counter);
    }
    let plan = FloorPlan::new(id.clone(), draft.rooms);

    let worker = state.clone();
    let (snapshot, coordinate, stress) =
        tokio::task::spawn_blocking(move || apply_insert(&worker, &base, plan))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))??;
    let version = snapshot.version;
    state.publish(snapshot);
    *counter += 1;
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "id": id,
            "coordinate": coordinate,
            "stress": stress,
            "version": version,
        })),
    ))
}

/// Builds (and persists) the snapshot that follows `base` with `plan` added.
fn apply_insert(
    state: &AppState,
    base: &Snapshot,
    plan: FloorPlan,
) -> Result<(Snapshot, Vec<f64>, f64), ApiError> {
    let targets = base
        .embedding
        .ids()
        .iter()
        .map(|anchor| {
            let other = base
                .dataset
                .get(anchor)
                .ok_or_else(|| ApiError::internal(format!("embedded id \"{anchor}\" has no plan")))?;
            Ok((anchor.clone(), plan_iou_distance(&plan, other, IouMode::Category)))
        })
        .collect::<Result<_, ApiError>>()?;
    let (coordinate, report) = insert_point(&base.embedding, &targets, &state.shared.solver)
        .map_err(|e| ApiError::internal(e.to_string()))?;

    let mut dataset = base.dataset.clone();
    let mut embedding = base.embedding.clone();
    let id = plan.id.clone();
    dataset
        .push(plan)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    embedding
        .push(id, &coordinate)
        .map_err(|e| ApiError::internal(e.to_string()))?;

    if let Some(ws) = &state.shared.workspace {
        save_dataset(&dataset, ws.path(PLANS)).map_err(|e| ApiError::internal(e.to_string()))?;
        write_embedding(&embedding, ws.path(EMBEDDING)).map_err(|e| ApiError::internal(e.to_string()))?;
    }
    let next = Snapshot::new(base.version + 1, dataset, embedding, base.labels.clone());
    Ok((next, coordinate, report.final_stress))
}
