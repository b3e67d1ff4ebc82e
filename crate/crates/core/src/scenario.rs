//! Authoring tasks packaged with a registry, probe timelines and the traces
//! their reference rules produce.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analyzer::{analyze, AnalyzerError};
use crate::capability::{load_registry, ActionRef, CapabilityRegistry, ModelError};
use crate::diagnostic::Diagnostic;
use crate::dsl::{parse_rules_file, ParseError};
use crate::engine::{run_simulation, EmissionTrace, EngineConfig, EngineError, Timeline, TraceEntry};
use crate::fixtures;
use crate::grade::{grade, GradeError, GradeLabel, GradeReport, ReferenceTask};
use crate::rule::Rule;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("scenario syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown registry file `{0}`")]
    UnknownRegistry(String),
    #[error("registry: {0}")]
    Registry(#[from] ModelError),
    #[error("reference rule {index}: {error}")]
    Reference { index: usize, error: ParseError },
    #[error("probe and expected trace counts differ ({probes} vs {expected})")]
    ProbeCount { probes: usize, expected: usize },
    #[error("`ordered_do` lists {got} flags for {rules} reference rules")]
    OrderedDo { got: usize, rules: usize },
    #[error("probe {probe}: reference rules do not reproduce the expected trace")]
    SelfConsistency { probe: usize, diff: Box<TraceDiff> },
    #[error("reference rules do not grade S against their own task")]
    ReferenceGrade,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Grade(#[from] GradeError),
    #[error(transparent)]
    Analyzer(#[from] AnalyzerError),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RegistrySource {
    File(String),
    Inline(serde_json::Value),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OrderedDo {
    All(bool),
    Each(Vec<bool>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskDoc {
    reference_rules: Vec<String>,
    #[serde(default)]
    ordered_do: Option<OrderedDo>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    id: String,
    #[serde(default)]
    description: String,
    registry: RegistrySource,
    task: TaskDoc,
    probes: Vec<Timeline>,
    expected: Vec<EmissionTrace>,
    #[serde(default)]
    max_cascade_depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub registry: CapabilityRegistry,
    pub task: ReferenceTask,
    pub probe_timelines: Vec<Timeline>,
    pub expected_traces: Vec<EmissionTrace>,
    pub config: EngineConfig,
}

/// One firing or abort, without the payload details a diff ignores.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    Action { t: i64, depth: usize, action: ActionRef },
    LoopAborted { t: i64, depth: usize },
}

fn events(trace: &EmissionTrace) -> BTreeMap<TraceEvent, usize> {
    let mut out = BTreeMap::new();
    for entry in &trace.entries {
        match entry {
            TraceEntry::Fire { t, depth, actions, .. } => {
                for a in actions {
                    let key = TraceEvent::Action {
                        t: *t,
                        depth: *depth,
                        action: a.clone(),
                    };
                    *out.entry(key).or_insert(0) += 1;
                }
            }
            TraceEntry::LoopAborted { t, depth, .. } => {
                *out.entry(TraceEvent::LoopAborted { t: *t, depth: *depth }).or_insert(0) += 1;
            }
        }
    }
    out
}

/// Multiset difference between an expected and an actual trace.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDiff {
    pub missing: Vec<TraceEvent>,
    pub extra: Vec<TraceEvent>,
}

impl TraceDiff {
    pub fn between(expected: &EmissionTrace, actual: &EmissionTrace) -> Self {
        let want = events(expected);
        let got = events(actual);
        let spill = |a: &BTreeMap<TraceEvent, usize>, b: &BTreeMap<TraceEvent, usize>| {
            let mut out = Vec::new();
            for (e, &n) in a {
                let m = b.get(e).copied().unwrap_or(0);
                out.extend(std::iter::repeat_n(e.clone(), n.saturating_sub(m)));
            }
            out
        };
        TraceDiff {
            missing: spill(&want, &got),
            extra: spill(&got, &want),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub probe: usize,
    pub diff: TraceDiff,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub grade: GradeLabel,
    pub grading: GradeReport,
    pub probes: Vec<ProbeResult>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Loads a scenario whose registry file references name bundled registries.
pub fn load_scenario(source: &str) -> Result<Scenario, ScenarioError> {
    load_scenario_with(source, |name| fixtures::resolve_registry(name).map(str::to_owned))
}

/// Loads a scenario, resolving registry file references through `resolve`,
/// and checks that the reference rules reproduce every expected trace.
pub fn load_scenario_with(
    source: &str,
    resolve: impl Fn(&str) -> Option<String>,
) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(source).map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let registry = match doc.registry {
        RegistrySource::File(name) => {
            let text = resolve(&name).ok_or(ScenarioError::UnknownRegistry(name))?;
            load_registry(&text)?
        }
        RegistrySource::Inline(value) => load_registry(&value.to_string())?,
    };

    let mut reference_rules = Vec::with_capacity(doc.task.reference_rules.len());
    for (index, text) in doc.task.reference_rules.iter().enumerate() {
        let parsed = parse_rules_file(text).map_err(|error| ScenarioError::Reference { index, error })?;
        for p in parsed {
            reference_rules.push(p.rule.with_id(crate::rule::RuleId::positional(reference_rules.len() + 1)));
        }
    }
    let ordered_do = match doc.task.ordered_do {
        None => vec![false; reference_rules.len()],
        Some(OrderedDo::All(b)) => vec![b; reference_rules.len()],
        Some(OrderedDo::Each(v)) if v.len() == reference_rules.len() => v,
        Some(OrderedDo::Each(v)) => {
            return Err(ScenarioError::OrderedDo {
                got: v.len(),
                rules: reference_rules.len(),
            })
        }
    };
    if doc.probes.len() != doc.expected.len() {
        return Err(ScenarioError::ProbeCount {
            probes: doc.probes.len(),
            expected: doc.expected.len(),
        });
    }
    let config = match doc.max_cascade_depth {
        Some(d) => EngineConfig::new(d)?,
        None => EngineConfig::default(),
    };
    let scenario = Scenario {
        id: doc.id.clone(),
        task: ReferenceTask {
            id: doc.id,
            description: doc.description,
            reference_rules,
            ordered_do,
        },
        registry,
        probe_timelines: doc.probes,
        expected_traces: doc.expected,
        config,
    };

    for (probe, (timeline, expected)) in scenario.probe_timelines.iter().zip(&scenario.expected_traces).enumerate() {
        let actual = run_simulation(&scenario.registry, &scenario.task.reference_rules, timeline, &scenario.config)?;
        if &actual != expected {
            return Err(ScenarioError::SelfConsistency {
                probe,
                diff: Box::new(TraceDiff::between(expected, &actual)),
            });
        }
    }
    if grade(&scenario.task.reference_rules, &scenario.task, &scenario.registry)?.label != GradeLabel::S {
        return Err(ScenarioError::ReferenceGrade);
    }
    Ok(scenario)
}

/// A bundled scenario by task id.
pub fn bundled(id: &str) -> Option<Scenario> {
    fixtures::scenario_source(id).map(|src| load_scenario(src).expect("bundled scenarios are consistent"))
}

/// Grades `candidates`, runs them over every probe and analyzes them.
pub fn run_scenario(scenario: &Scenario, candidates: &[Rule]) -> Result<ScenarioReport, ScenarioError> {
    let grading = grade(candidates, &scenario.task, &scenario.registry)?;
    let mut probes = Vec::with_capacity(scenario.probe_timelines.len());
    for (probe, (timeline, expected)) in scenario.probe_timelines.iter().zip(&scenario.expected_traces).enumerate() {
        let actual = run_simulation(&scenario.registry, candidates, timeline, &scenario.config)?;
        probes.push(ProbeResult {
            probe,
            diff: TraceDiff::between(expected, &actual),
        });
    }
    let diagnostics = analyze(candidates, &scenario.registry)?;
    Ok(ScenarioReport {
        scenario: scenario.id.clone(),
        grade: grading.label,
        grading,
        probes,
        diagnostics,
    })
}

/// Expected traces for `probes` under `rules`, for writing scenario files.
pub fn expected_traces(
    registry: &CapabilityRegistry,
    rules: &[Rule],
    probes: &[Timeline],
    config: &EngineConfig,
) -> Result<Vec<EmissionTrace>, EngineError> {
    probes.iter().map(|p| run_simulation(registry, rules, p, config)).collect()
}

/// One row of the curated candidate table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateCase {
    pub name: String,
    pub task: String,
    pub rules: String,
    pub expected: GradeLabel,
}

pub fn candidate_table() -> Vec<CandidateCase> {
    serde_json::from_str(fixtures::CANDIDATES).expect("bundled candidate table is valid")
}
