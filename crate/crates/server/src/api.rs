use std::path::Path;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::Router;
use fieldnet_core::cloudcore::{NodeDescriptor, NodePatch};
use fieldnet_core::packet::{Command, NodeId, Packet, PacketKey};
use fieldnet_core::wire::{FaultRequest, FaultScheduled, LiveStatus, RateRequest, SeriesPoint, Stats};
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::ndjson::{parse, parse_one, ApiError, Lines};
use crate::AppState;

type ApiResult = Result<Lines, ApiError>;

pub fn router(state: AppState, assets: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/ingest", post(ingest))
        .route("/nodes", get(list_nodes).post(register_node))
        .route("/nodes/{id}", get(get_node).patch(update_node))
        .route("/nodes/{id}/health", get(node_health))
        .route("/nodes/{id}/commands", get(node_commands).post(command_node))
        .route("/groups/{name}/rate", post(group_rate))
        .route("/groups/{name}/commands", get(group_commands))
        .route("/health/silent", get(silent_nodes))
        .route("/series", get(series))
        .route("/export/semantic", get(export_semantic))
        .route("/quarantine", get(quarantine))
        .route("/stats", get(stats))
        .route("/sim/status", get(sim_status))
        .route("/sim/faults", post(inject_fault))
        .with_state(state);
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

async fn ingest(State(s): State<AppState>, body: Bytes) -> ApiResult {
    let packets: Vec<Packet> = parse(&body)?;
    let now = s.clock.now();
    let acked = s.cloud.write().ingest_batch(&packets, now)?;
    Ok(Lines::of(acked))
}

#[derive(Deserialize)]
struct GroupFilter {
    group: Option<String>,
}

async fn list_nodes(State(s): State<AppState>, Query(q): Query<GroupFilter>) -> ApiResult {
    let cloud = s.cloud.read();
    let nodes = cloud
        .nodes()
        .map(|e| &e.descriptor)
        .filter(|d| q.group.as_ref().is_none_or(|g| d.groups.contains(g)));
    Ok(Lines::of(nodes))
}

async fn register_node(State(s): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let d: NodeDescriptor = parse_one(&body)?;
    let id = d.node_id.clone();
    let now = s.clock.now();
    let mut cloud = s.cloud.write();
    cloud.register_node(d, now)?;
    Ok((StatusCode::CREATED, Lines::one(&cloud.node(&id)?.descriptor)))
}

async fn get_node(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let cloud = s.cloud.read();
    Ok(Lines::one(cloud.node(&NodeId::new(id))?))
}

async fn update_node(State(s): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let patch: NodePatch = parse_one(&body)?;
    let now = s.clock.now();
    let d = s.cloud.write().update_node(&NodeId::new(id), patch, now)?;
    Ok(Lines::one(d))
}

async fn node_health(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let now = s.clock.now();
    Ok(Lines::one(s.cloud.read().node_health(&NodeId::new(id), now)?))
}

async fn silent_nodes(State(s): State<AppState>) -> ApiResult {
    let now = s.clock.now();
    Ok(Lines::of(s.cloud.read().silent_nodes(now)))
}

async fn node_commands(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let id = NodeId::new(id);
    let cloud = s.cloud.read();
    cloud.node(&id)?;
    Ok(Lines::of(cloud.node_commands(&id)))
}

async fn command_node(
    State(s): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let command: Command = parse_one(&body)?;
    let now = s.clock.now();
    let status = s.cloud.write().command_node(&NodeId::new(id), command, now)?;
    Ok((StatusCode::CREATED, Lines::one(status)))
}

async fn group_rate(
    State(s): State<AppState>,
    UrlPath(name): UrlPath<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: RateRequest = parse_one(&body)?;
    let now = s.clock.now();
    let cmd = s.cloud.write().set_group_rate(&name, req.period_s, now)?;
    Ok((StatusCode::CREATED, Lines::one(cmd)))
}

async fn group_commands(State(s): State<AppState>, UrlPath(name): UrlPath<String>) -> ApiResult {
    Ok(Lines::of(s.cloud.read().group_commands(&name)?))
}

#[derive(Deserialize)]
struct SeriesQuery {
    node: String,
    channel: String,
    #[serde(default)]
    from: u64,
    to: Option<u64>,
}

async fn series(State(s): State<AppState>, Query(q): Query<SeriesQuery>) -> ApiResult {
    let to = q.to.unwrap_or(u64::MAX);
    let points = s
        .cloud
        .read()
        .query_series(&NodeId::new(q.node), &q.channel, q.from, to)?;
    Ok(Lines::of(points.into_iter().map(|(t, value)| SeriesPoint { t, value })))
}

#[derive(Deserialize)]
struct KeyQuery {
    node: String,
    seq: u64,
}

async fn export_semantic(State(s): State<AppState>, Query(q): Query<KeyQuery>) -> Result<impl IntoResponse, ApiError> {
    let key = PacketKey::new(q.node, q.seq);
    let triples = s.cloud.read().export_semantic(&key)?;
    let mut out = String::new();
    for t in triples {
        out.push_str(&t.to_string());
        out.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], out))
}

async fn quarantine(State(s): State<AppState>) -> ApiResult {
    let cloud = s.cloud.read();
    Ok(Lines::of(cloud.quarantined()))
}

async fn stats(State(s): State<AppState>) -> ApiResult {
    let now = s.clock.now();
    let cloud = s.cloud.read();
    let groups = cloud
        .nodes()
        .flat_map(|e| e.descriptor.groups.iter().cloned())
        .collect();
    Ok(Lines::one(Stats {
        now,
        stats: cloud.stats(now),
        groups,
    }))
}

async fn sim_status(State(s): State<AppState>) -> ApiResult {
    let sim = s
        .sim
        .as_ref()
        .ok_or_else(|| ApiError::not_found("no live simulation"))?;
    Ok(Lines::one(LiveStatus {
        status: sim.status(),
        error: sim.error(),
    }))
}

async fn inject_fault(State(s): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let sim = s
        .sim
        .as_ref()
        .ok_or_else(|| ApiError::not_found("no live simulation"))?;
    let req: FaultRequest = parse_one(&body)?;
    let fault = req.fault.name().to_string();
    let at_s = sim.inject(req.at_s, &req.target, req.fault)?;
    Ok((
        StatusCode::CREATED,
        Lines::one(FaultScheduled {
            at_s,
            target: req.target,
            fault,
        }),
    ))
}
