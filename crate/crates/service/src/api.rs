//! HTTP/JSON API under `/api`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sensation_core::capability::{filter_capabilities, CapabilityRegistry, Slot};
use sensation_core::dsl::parse_rule;
use sensation_core::engine::Timeline;
use sensation_core::rule::{validate_rule, Rule, RuleId, Violation};

use crate::error::OpError;
use crate::ops::{self, render, RuleView};
use crate::store::RuleStore;

pub struct AppState {
    pub registry: CapabilityRegistry,
    pub store: Mutex<RuleStore>,
}

impl AppState {
    pub fn new(registry: CapabilityRegistry, store: RuleStore) -> Arc<Self> {
        Arc::new(AppState {
            registry,
            store: Mutex::new(store),
        })
    }

    fn store(&self) -> MutexGuard<'_, RuleStore> {
        // A panic while holding the lock cannot leave a torn store: the
        // in-memory document only changes after a successful write.
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }
}

type Shared = State<Arc<AppState>>;

fn json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn ok<T: Serialize>(value: &T) -> Response {
    json(StatusCode::OK, render(value))
}

impl IntoResponse for OpError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        json(status, self.to_json())
    }
}

type ApiResult = Result<Response, OpError>;

/// Parses a JSON body; an empty body reads as `{}`.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, OpError> {
    let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| OpError::BadRequest(format!("malformed request body: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleInput {
    dsl: Option<String>,
    ast: Option<serde_json::Value>,
    revision: Option<u64>,
}

/// An AST may omit `id`; the store assigns ids anyway.
fn rule_from_ast(mut ast: serde_json::Value) -> Result<Rule, OpError> {
    if let Some(obj) = ast.as_object_mut() {
        obj.entry("id").or_insert_with(|| "r0".into());
    }
    serde_json::from_value(ast).map_err(|e| OpError::BadRequest(format!("malformed rule AST: {e}")))
}

impl RuleInput {
    fn rule(self) -> Result<Rule, OpError> {
        match (self.dsl, self.ast) {
            (Some(text), None) => Ok(parse_rule(&text)?.rule),
            (None, Some(ast)) => rule_from_ast(ast),
            _ => Err(OpError::BadRequest("send exactly one of `dsl` or `ast`".into())),
        }
    }
}

/// Inline rules for analysis, simulation and grading: a rules file as
/// `dsl`, or a list of ASTs as `rules`. Neither means the stored rules.
#[derive(Deserialize, Default)]
struct InlineRules {
    dsl: Option<String>,
    rules: Option<Vec<serde_json::Value>>,
}

impl InlineRules {
    fn resolve(self, state: &AppState) -> Result<Vec<Rule>, OpError> {
        match (self.dsl, self.rules) {
            (Some(text), None) => ops::parse_rules_text(&text),
            (None, Some(list)) => list
                .into_iter()
                .map(|v| serde_json::from_value(v).map_err(|e| OpError::BadRequest(format!("malformed rule AST: {e}"))))
                .collect(),
            (None, None) => Ok(state.store().rules().to_vec()),
            _ => Err(OpError::BadRequest("send at most one of `dsl` or `rules`".into())),
        }
    }
}

async fn registry(State(state): Shared) -> Response {
    json(StatusCode::OK, render(&state.registry.to_json_value()))
}

#[derive(Serialize)]
struct CapabilitiesOutput<'a> {
    slot: Slot,
    #[serde(skip_serializing_if = "Option::is_none")]
    device: Option<&'a str>,
    capabilities: Vec<&'a sensation_core::capability::Capability>,
}

async fn capabilities(State(state): Shared, query: Result<Query<HashMap<String, String>>, QueryRejection>) -> ApiResult {
    let Query(query) = query.map_err(|e| OpError::BadRequest(e.body_text()))?;
    let slot: Slot = query
        .get("slot")
        .ok_or_else(|| OpError::BadRequest("`slot` is required (do, when or while)".into()))?
        .to_ascii_lowercase()
        .parse()
        .map_err(OpError::BadRequest)?;
    let device = query.get("device").map(String::as_str);
    let capabilities = filter_capabilities(&state.registry, slot, device)?;
    Ok(ok(&CapabilitiesOutput {
        slot,
        device,
        capabilities,
    }))
}

#[derive(Serialize)]
struct RulesOutput {
    revision: u64,
    rules: Vec<RuleView>,
}

async fn list_rules(State(state): Shared) -> Response {
    let store = state.store();
    ok(&RulesOutput {
        revision: store.revision(),
        rules: store.rules().iter().map(RuleView::of).collect(),
    })
}

#[derive(Serialize)]
struct StoredOutput {
    revision: u64,
    rule: RuleView,
}

async fn create_rule(State(state): Shared, bytes: Bytes) -> ApiResult {
    let rule = body::<RuleInput>(&bytes)?.rule()?;
    let mut store = state.store();
    let stored = store.add(&rule, &state.registry)?;
    Ok(json(
        StatusCode::CREATED,
        render(&StoredOutput {
            revision: store.revision(),
            rule: RuleView::of(&stored),
        }),
    ))
}

async fn replace_rule(State(state): Shared, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let input = body::<RuleInput>(&bytes)?;
    let revision = input.revision;
    let rule = input.rule()?;
    let mut store = state.store();
    let stored = store.replace(&RuleId::new(id), &rule, revision, &state.registry)?;
    Ok(ok(&StoredOutput {
        revision: store.revision(),
        rule: RuleView::of(&stored),
    }))
}

#[derive(Serialize)]
struct DeletedOutput {
    revision: u64,
    deleted: RuleId,
}

async fn delete_rule(
    State(state): Shared,
    Path(id): Path<String>,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult {
    let Query(query) = query.map_err(|e| OpError::BadRequest(e.body_text()))?;
    let revision = query
        .get("revision")
        .map(|r| r.parse::<u64>().map_err(|_| OpError::BadRequest(format!("bad revision `{r}`"))))
        .transpose()?;
    let mut store = state.store();
    let removed = store.delete(&RuleId::new(id), revision)?;
    Ok(ok(&DeletedOutput {
        revision: store.revision(),
        deleted: removed.id,
    }))
}

#[derive(Serialize)]
struct ValidateOutput {
    valid: bool,
    rule: RuleView,
    violations: Vec<Violation>,
}

async fn validate(State(state): Shared, bytes: Bytes) -> ApiResult {
    let rule = body::<RuleInput>(&bytes)?.rule()?;
    let report = validate_rule(&rule, &state.registry);
    Ok(ok(&ValidateOutput {
        valid: report.is_ok(),
        rule: RuleView::of(&rule),
        violations: report.violations,
    }))
}

async fn analyze(State(state): Shared, bytes: Bytes) -> ApiResult {
    let rules = body::<InlineRules>(&bytes)?.resolve(&state)?;
    Ok(ok(&ops::analyze(&rules, &state.registry)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateInput {
    scenario: Option<String>,
    timeline: Option<serde_json::Value>,
    dsl: Option<String>,
    rules: Option<Vec<serde_json::Value>>,
}

async fn simulate(State(state): Shared, bytes: Bytes) -> ApiResult {
    let input = body::<SimulateInput>(&bytes)?;
    let rules = InlineRules {
        dsl: input.dsl,
        rules: input.rules,
    }
    .resolve(&state)?;
    let output = match (input.scenario, input.timeline) {
        (Some(id), None) => ops::simulate_scenario(&ops::bundled_scenario(&id)?, &rules)?,
        (None, Some(tl)) => {
            let timeline: Timeline = serde_json::from_value(tl).map_err(|e| OpError::Timeline(e.to_string()))?;
            ops::simulate_timeline(&rules, &timeline, &state.registry)?
        }
        _ => return Err(OpError::BadRequest("send exactly one of `scenario` or `timeline`".into())),
    };
    Ok(ok(&output))
}

async fn scenarios() -> Response {
    ok(&ops::scenarios())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GradeInput {
    task: String,
    dsl: Option<String>,
    rules: Option<Vec<serde_json::Value>>,
}

async fn grade(State(state): Shared, bytes: Bytes) -> ApiResult {
    let input = body::<GradeInput>(&bytes)?;
    let scenario = ops::bundled_task(&input.task)?;
    let rules = InlineRules {
        dsl: input.dsl,
        rules: input.rules,
    }
    .resolve(&state)?;
    Ok(ok(&ops::grade(&scenario, &rules)?))
}

async fn not_found() -> OpError {
    OpError::NotFound("no such endpoint".into())
}

async fn method_not_allowed() -> OpError {
    OpError::MethodNotAllowed
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/registry", get(registry))
        .route("/capabilities", get(capabilities))
        .route("/rules", get(list_rules).post(create_rule))
        .route("/rules/{id}", put(replace_rule).delete(delete_rule))
        .route("/validate", post(validate))
        .route("/analyze", post(analyze))
        .route("/simulate", post(simulate))
        .route("/scenarios", get(scenarios))
        .route("/grade", post(grade));
    Router::new()
        .nest("/api", api)
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
}
