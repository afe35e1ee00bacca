//! HTTP + JSON API over a live session, the plan store and the bus.
//!
//! Plan runs reset a private world from the chosen scene, stream their
//! transitions on the bus and, when finished, replace the live session's
//! world. Runs and operations execute on blocking threads; handlers only
//! hold the session lock for snapshot-sized critical sections.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use costar_core::btree::{Diagnostic, ParamValue};
use costar_core::components::{Catalog, OpError, Params};
use costar_core::dsl::{self, PlanDocument};
use costar_core::object::ClassRegistry;
use costar_core::predicator::{parse_statements, Symbol};
use costar_core::runtime::{
    plan_id, run_batch, run_plan, single_report, validate_plan, Bus, NoiseOverrides, PlanStore, RunConfig, RunError,
    Session, StoreError, BUNDLED_SCENES, DEFAULT_TICK_BUDGET, TOPIC_RUNS, TOPIC_SIM, TOPIC_SYMBOLS, TOPIC_TRANSITIONS,
};
use costar_core::sim::Scene;
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::{json, Value};

const EVENT_POLL: Duration = Duration::from_millis(20);
const STANDARD_TOPICS: [&str; 4] = [TOPIC_TRANSITIONS, TOPIC_SYMBOLS, TOPIC_SIM, TOPIC_RUNS];

pub struct ServerConfig {
    /// Plans persist here; `None` keeps them in memory.
    pub data_dir: Option<PathBuf>,
    /// Extra scenes besides the bundled ones.
    pub scenes: Vec<Scene>,
    pub default_scene: String,
    pub seed: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            scenes: Vec::new(),
            default_scene: "assembly".into(),
            seed: 0,
        }
    }
}

pub struct AppState {
    pub bus: Bus,
    store: Mutex<PlanStore>,
    session: Mutex<Session>,
    scenes: BTreeMap<String, Scene>,
    default_scene: String,
    classes: ClassRegistry,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl AppState {
    pub fn new(config: ServerConfig) -> Result<Self, String> {
        let mut scenes: BTreeMap<String, Scene> = BUNDLED_SCENES
            .iter()
            .map(|(n, t)| Ok((n.to_string(), Scene::from_yaml(t).map_err(|e| e.to_string())?)))
            .collect::<Result<_, String>>()?;
        for s in config.scenes {
            scenes.insert(s.name.clone(), s);
        }
        let scene = scenes
            .get(&config.default_scene)
            .cloned()
            .ok_or_else(|| format!("unknown scene `{}`", config.default_scene))?;
        let store = match &config.data_dir {
            Some(dir) => PlanStore::open(dir).map_err(|e| e.to_string())?,
            None => PlanStore::in_memory(),
        };
        let classes = ClassRegistry::default();
        Ok(Self {
            bus: Bus::auto_create(),
            store: Mutex::new(store),
            session: Mutex::new(Session::new(scene, classes.clone(), config.seed)),
            scenes,
            default_scene: config.default_scene,
            classes,
        })
    }

    fn scene(&self, name: Option<&str>) -> Result<Scene, ApiError> {
        let name = name.unwrap_or(&self.default_scene);
        self.scenes
            .get(name)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown scene `{name}`")))
    }

    fn plan(&self, id: &str) -> Result<PlanDocument, ApiError> {
        let store = lock(&self.store);
        let (_, doc) = store.get(id).map_err(ApiError::from)?;
        Ok(doc.clone())
    }

    /// Publishes symbols that differ from `before`.
    fn publish_symbol_changes(&self, before: &BTreeMap<String, Symbol>, session: &Session) {
        let now = &session.world.predicator.kb().symbols;
        let upserted: Vec<&Symbol> = now.iter().filter(|(k, s)| before.get(*k) != Some(*s)).map(|(_, s)| s).collect();
        let removed: Vec<&String> = before.keys().filter(|k| !now.contains_key(*k)).collect();
        if !upserted.is_empty() || !removed.is_empty() {
            self.bus
                .publish(TOPIC_SYMBOLS, json!({ "run": null, "upserted": upserted, "removed": removed }));
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownPlan(_) => Self::new(StatusCode::NOT_FOUND, e.to_string()),
            StoreError::VersionConflict { current, .. } => Self {
                status: StatusCode::CONFLICT,
                body: json!({ "error": e.to_string(), "currentVersion": current }),
            },
            StoreError::Syntax(s) => Self {
                status: StatusCode::BAD_REQUEST,
                body: json!({ "error": s.message, "span": s.span }),
            },
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

fn op_error(e: OpError) -> ApiError {
    let status = match e {
        OpError::UnknownComponent(_) | OpError::UnknownOperation { .. } => StatusCode::NOT_FOUND,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    };
    ApiError::new(status, e.to_string())
}

fn diagnostics_json(doc: &PlanDocument, diagnostics: &[Diagnostic]) -> Value {
    Value::Array(
        diagnostics
            .iter()
            .map(|d| {
                json!({
                    "nodeId": d.node_id,
                    "kind": d.kind,
                    "message": d.message,
                    "span": doc.span_of(&d.node_id),
                })
            })
            .collect(),
    )
}

fn run_error(doc: &PlanDocument, e: RunError) -> ApiError {
    match e {
        RunError::ValidationFailed(d) => ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({ "error": "validation failed", "diagnostics": diagnostics_json(doc, &d) }),
        },
        other => ApiError::bad_request(other.to_string()),
    }
}

/// JSON body, or `T::default()` when empty.
fn optional_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/components", get(components))
        .route("/components/{name}/ops/{op}", post(invoke_op))
        .route("/symbols", get(symbols))
        .route("/predicates", get(predicates))
        .route("/query", post(query))
        .route("/plan", get(list_plans).post(create_plan))
        .route("/plan/{id}", get(get_plan))
        .route("/plan/{id}/validate", post(validate))
        .route("/plan/{id}/run", post(run))
        .route("/plan/{id}/batch", post(batch))
        .route("/scenes", get(scenes))
        .route("/session", get(session_state).post(reset_session))
        .route("/events", get(events))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn components(State(s): State<Arc<AppState>>) -> Json<Value> {
    let session = lock(&s.session);
    Json(json!(session.registry.descriptors()))
}

async fn invoke_op(
    State(s): State<Arc<AppState>>,
    Path((name, op)): Path<(String, String)>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let params: BTreeMap<String, ParamValue> = optional_body(&body)?;
    let params: Params = params.into_iter().collect();
    let state = s.clone();
    let out = blocking(move || {
        let mut session = lock(&state.session);
        let before = session.world.predicator.kb().symbols.clone();
        let out = session.call(&name, &op, &params, DEFAULT_TICK_BUDGET);
        state.publish_symbol_changes(&before, &session);
        out
    })
    .await?;
    out.map(Json).map_err(op_error)
}

async fn symbols(State(s): State<Arc<AppState>>) -> Json<Value> {
    let session = lock(&s.session);
    Json(json!(session.world.predicator.symbols().collect::<Vec<_>>()))
}

async fn predicates(State(s): State<Arc<AppState>>) -> Json<Value> {
    let session = lock(&s.session);
    let defs: Vec<_> = session.world.predicator.definitions().map(|d| d.signature()).collect();
    Json(json!(defs))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct QueryBody {
    /// `;`-separated statements. With a `?` variable the symbols satisfying
    /// all of them are returned, otherwise the truth value of each.
    statements: Option<String>,
    /// List every true ground statement instead.
    all: bool,
}

async fn query(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let q: QueryBody = optional_body(&body)?;
    let session = lock(&s.session);
    let p = &session.world.predicator;
    if q.all {
        let all: Vec<String> = p.list_true().iter().map(ToString::to_string).collect();
        return Ok(Json(json!({ "true": all })));
    }
    let text = q.statements.ok_or_else(|| ApiError::bad_request("`statements` or `all` required"))?;
    let statements = parse_statements(&text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if statements.iter().any(|st| st.args.iter().any(|a| a.starts_with('?'))) {
        let matches = p.query_symbols(&statements).map_err(|e| ApiError::bad_request(e.to_string()))?;
        return Ok(Json(json!({ "matches": matches })));
    }
    let values = statements
        .iter()
        .map(|st| Ok(json!({ "statement": st.to_string(), "value": p.evaluate(st)? })))
        .collect::<Result<Vec<_>, costar_core::predicator::PredicateError>>()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(json!({ "results": values })))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PlanBody {
    text: Option<String>,
    document: Option<Value>,
    expected_version: Option<u32>,
}

fn plan_json(s: &AppState, doc: &PlanDocument, entry: &costar_core::runtime::PlanEntry) -> Value {
    let scene = s.scenes.get(&s.default_scene).cloned().unwrap_or_else(|| Scene::empty("default"));
    let diagnostics = validate_plan(doc, &scene, &s.classes);
    json!({
        "id": entry.id,
        "name": entry.name,
        "version": entry.version,
        "text": dsl::serialize(doc),
        "root": doc.root,
        "diagnostics": diagnostics_json(doc, &diagnostics),
    })
}

/// Accepts DSL text as the raw body, or JSON with `text` or `document`.
async fn create_plan(State(s): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let raw = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let (doc, expected) = match serde_json::from_str::<PlanBody>(raw) {
        Ok(PlanBody {
            text: Some(text),
            expected_version,
            ..
        }) => (dsl::parse(&text).map_err(StoreError::from)?, expected_version),
        Ok(PlanBody {
            document: Some(d),
            expected_version,
            ..
        }) => (
            PlanDocument::from_json(&d.to_string()).map_err(ApiError::bad_request)?,
            expected_version,
        ),
        Ok(_) => return Err(ApiError::bad_request("expected `text` or `document`")),
        Err(_) => (dsl::parse(raw).map_err(StoreError::from)?, None),
    };
    let entry = lock(&s.store).put(doc.clone(), expected)?;
    Ok((StatusCode::CREATED, Json(plan_json(&s, &doc, &entry))))
}

async fn list_plans(State(s): State<Arc<AppState>>) -> Json<Value> {
    Json(json!(lock(&s.store).list()))
}

async fn get_plan(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let (entry, doc) = {
        let store = lock(&s.store);
        let (e, d) = store.get(&id)?;
        (e.clone(), d.clone())
    };
    Ok(Json(plan_json(&s, &doc, &entry)))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, rename_all = "camelCase")]
struct RunBody {
    scene: Option<String>,
    seed: Option<u64>,
    noise: NoiseOverrides,
    tick_budget: Option<u64>,
    /// Keep the live session as it was instead of adopting the run's world.
    detached: bool,
    trials: Option<usize>,
    seed_base: Option<u64>,
}

impl RunBody {
    fn config(&self) -> RunConfig {
        RunConfig {
            tick_budget: self.tick_budget.unwrap_or(DEFAULT_TICK_BUDGET),
            noise: self.noise,
            ..Default::default()
        }
    }
}

async fn validate(State(s): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let b: RunBody = optional_body(&body)?;
    let doc = s.plan(&id)?;
    let scene = s.scene(b.scene.as_deref())?;
    let diagnostics = validate_plan(&doc, &scene, &s.classes);
    Ok(Json(json!({
        "id": plan_id(&doc),
        "valid": diagnostics.is_empty(),
        "diagnostics": diagnostics_json(&doc, &diagnostics),
    })))
}

async fn run(State(s): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let b: RunBody = optional_body(&body)?;
    let doc = s.plan(&id)?;
    let scene = s.scene(b.scene.as_deref())?;
    let state = s.clone();
    let out = blocking(move || {
        let seed = b.seed.unwrap_or(scene.seed);
        let trial = run_plan(&doc, &scene, &state.classes, seed, &b.config(), Some(&state.bus)).map_err(|e| run_error(&doc, e))?;
        let report = single_report(&doc, &trial);
        let events = trial.events.len();
        if !b.detached {
            let mut session = lock(&state.session);
            let before = session.world.predicator.kb().symbols.clone();
            session.scene = scene;
            session.adopt(trial);
            state.publish_symbol_changes(&before, &session);
        }
        Ok::<_, ApiError>(json!({ "report": report, "events": events }))
    })
    .await??;
    Ok(Json(out))
}

async fn batch(State(s): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let b: RunBody = optional_body(&body)?;
    let doc = s.plan(&id)?;
    let scene = s.scene(b.scene.as_deref())?;
    let classes = s.classes.clone();
    let report = blocking(move || {
        let trials = b.trials.unwrap_or(10);
        run_batch(&doc, &scene, &classes, trials, b.seed_base.unwrap_or(0), &b.config(), None).map_err(|e| run_error(&doc, e))
    })
    .await??;
    Ok(Json(json!(report)))
}

async fn scenes(State(s): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "default": s.default_scene, "scenes": s.scenes }))
}

async fn session_state(State(s): State<Arc<AppState>>) -> Json<Value> {
    let session = lock(&s.session);
    Json(json!({
        "scene": session.scene.name,
        "snapshot": session.world.sim.snapshot(),
        "objects": session.world.objects,
        "catalog": Catalog::of(&session.registry),
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct ResetBody {
    scene: Option<String>,
    seed: u64,
}

/// Rebuilds the live session from a scene.
async fn reset_session(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let b: ResetBody = optional_body(&body)?;
    let scene = s.scene(b.scene.as_deref())?;
    let name = scene.name.clone();
    let mut session = lock(&s.session);
    let before = session.world.predicator.kb().symbols.clone();
    *session = Session::new(scene, s.classes.clone(), b.seed);
    s.publish_symbol_changes(&before, &session);
    Ok(Json(json!({ "scene": name, "seed": b.seed })))
}

/// Websocket carrying bus messages as JSON text frames. Each query parameter
/// `topic=from` subscribes to `topic` starting at sequence `from`; with no
/// parameters every standard topic is followed from its current end.
async fn events(
    State(s): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let mut wanted: BTreeMap<String, u64> = BTreeMap::new();
    for (topic, from) in params {
        let from = from
            .parse()
            .map_err(|_| ApiError::bad_request(format!("`{topic}` needs a sequence number")))?;
        wanted.insert(topic, from);
    }
    if wanted.is_empty() {
        for t in STANDARD_TOPICS {
            wanted.insert(t.to_string(), s.bus.next_sequence(t));
        }
    }
    let subs = wanted
        .into_iter()
        .map(|(t, from)| s.bus.subscribe(&t, from))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(ws.on_upgrade(move |socket| stream_events(socket, subs)))
}

async fn stream_events(socket: WebSocket, mut subs: Vec<costar_core::runtime::Subscription>) {
    let (mut tx, mut rx) = socket.split();
    let mut ticker = tokio::time::interval(EVENT_POLL);
    loop {
        tokio::select! {
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
            _ = ticker.tick() => {
                for sub in &mut subs {
                    for msg in sub.drain() {
                        let text = serde_json::to_string(&msg).expect("message serializes");
                        if tx.send(Message::Text(text.into())).await.is_err() {
                            return;
                        }
                    }
                }
            }
        }
    }
}
