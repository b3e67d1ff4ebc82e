//! Operations shared by the HTTP API and the command line. Both render
//! results with [`render`], so the same inputs give the same bytes.

use serde::Serialize;

use sensation_core::analyzer;
use sensation_core::capability::CapabilityRegistry;
use sensation_core::diagnostic::Diagnostic;
use sensation_core::dsl::{self, ImportReport};
use sensation_core::engine::{run_simulation, EmissionTrace, EngineConfig, Timeline};
use sensation_core::grade::{self, GradeLabel, GradeReport};
use sensation_core::rule::{validate_rule, Rule, RuleId};
use sensation_core::scenario::{self, expected_traces, run_scenario, Scenario, ScenarioReport};

use crate::error::OpError;

/// Pretty JSON with a trailing newline.
pub fn render<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("outputs always serialize") + "\n"
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuleView {
    pub id: RuleId,
    pub dsl: String,
    pub ast: Rule,
}

impl RuleView {
    pub fn of(rule: &Rule) -> Self {
        RuleView {
            id: rule.id.clone(),
            dsl: dsl::print_rule(rule),
            ast: rule.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CheckOutput {
    pub rules: Vec<RuleView>,
}

#[derive(Debug, Serialize)]
pub struct AnalyzeOutput {
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Serialize)]
pub struct SimulateOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub traces: Vec<EmissionTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ScenarioReport>,
}

#[derive(Debug, Serialize)]
pub struct ImportEntry {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dsl: Option<String>,
    #[serde(flatten)]
    pub report: ImportReport,
}

#[derive(Debug, Serialize)]
pub struct ImportOutput {
    pub rules: Vec<ImportEntry>,
}

#[derive(Debug, Serialize)]
pub struct ScenarioSummary {
    pub id: String,
    pub description: String,
    pub reference_rules: Vec<String>,
    pub probes: usize,
}

pub fn parse_rules_text(text: &str) -> Result<Vec<Rule>, OpError> {
    Ok(dsl::parse_rules(text)?)
}

pub fn validate_all(rules: &[Rule], registry: &CapabilityRegistry) -> Result<(), OpError> {
    for rule in rules {
        let report = validate_rule(rule, registry);
        if !report.is_ok() {
            return Err(OpError::Invalid {
                rule: rule.id.clone(),
                violations: report.violations,
            });
        }
    }
    Ok(())
}

pub fn check(rules: &[Rule], registry: &CapabilityRegistry) -> Result<CheckOutput, OpError> {
    validate_all(rules, registry)?;
    Ok(CheckOutput {
        rules: rules.iter().map(RuleView::of).collect(),
    })
}

pub fn analyze(rules: &[Rule], registry: &CapabilityRegistry) -> Result<AnalyzeOutput, OpError> {
    Ok(AnalyzeOutput {
        diagnostics: analyzer::analyze(rules, registry)?,
    })
}

pub fn bundled_scenario(id: &str) -> Result<Scenario, OpError> {
    scenario::bundled(id).ok_or_else(|| OpError::UnknownScenario(id.to_owned()))
}

pub fn bundled_task(id: &str) -> Result<Scenario, OpError> {
    scenario::bundled(id).ok_or_else(|| OpError::UnknownTask(id.to_owned()))
}

pub fn simulate_scenario(scenario: &Scenario, rules: &[Rule]) -> Result<SimulateOutput, OpError> {
    let report = run_scenario(scenario, rules)?;
    let traces = expected_traces(&scenario.registry, rules, &scenario.probe_timelines, &scenario.config)?;
    Ok(SimulateOutput {
        scenario: Some(scenario.id.clone()),
        traces,
        report: Some(report),
    })
}

pub fn simulate_timeline(
    rules: &[Rule],
    timeline: &Timeline,
    registry: &CapabilityRegistry,
) -> Result<SimulateOutput, OpError> {
    let trace = run_simulation(registry, rules, timeline, &EngineConfig::default())?;
    Ok(SimulateOutput {
        scenario: None,
        traces: vec![trace],
        report: None,
    })
}

pub fn grade(scenario: &Scenario, rules: &[Rule]) -> Result<GradeReport, OpError> {
    Ok(grade::grade(rules, &scenario.task, &scenario.registry)?)
}

pub fn scenarios() -> Vec<ScenarioSummary> {
    sensation_core::fixtures::SCENARIOS
        .iter()
        .filter_map(|(id, _)| scenario::bundled(id))
        .map(|s| ScenarioSummary {
            id: s.id.clone(),
            description: s.task.description.clone(),
            reference_rules: s.task.reference_rules.iter().map(dsl::print_rule).collect(),
            probes: s.probe_timelines.len(),
        })
        .collect()
}

pub fn import_legacy(text: &str, registry: &CapabilityRegistry) -> Result<ImportOutput, OpError> {
    let legacy = dsl::load_legacy(text)?;
    let mut rules = Vec::with_capacity(legacy.len());
    for (i, rule) in legacy.iter().enumerate() {
        let report = dsl::import_legacy(RuleId::positional(i + 1), rule, registry)?;
        rules.push(ImportEntry {
            index: i,
            dsl: report.converted.as_ref().map(dsl::print_rule),
            report,
        });
    }
    Ok(ImportOutput { rules })
}

pub fn below_s(label: GradeLabel) -> bool {
    label != GradeLabel::S
}
