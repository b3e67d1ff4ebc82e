//! Findings about rule sets, in one shape for the analyzer and the legacy
//! importer.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::capability::{AttrKey, EventRef, Value};
use crate::rule::RuleId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DiagnosticKind {
    Contradiction,
    Loop,
    Redundancy,
    FlippedTrigger,
    TimeWindowFallacy,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagnosticKind::Contradiction => "contradiction",
            DiagnosticKind::Loop => "loop",
            DiagnosticKind::Redundancy => "redundancy",
            DiagnosticKind::FlippedTrigger => "flipped-trigger",
            DiagnosticKind::TimeWindowFallacy => "time-window-fallacy",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Partial world: values for just the attributes a finding depends on.
pub type Assignment = BTreeMap<AttrKey, Value>;

/// Evidence that lets a finding be replayed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// Starting from this world, `event` makes every implicated rule fire.
    World { event: EventRef, assignments: Assignment },
    /// Rule chain `path[0] -> path[1] -> ... -> path[0]`; `events[i]` is the
    /// event through which `path[i]` triggers the next rule. `world`, when
    /// present, lets the first rule fire on its own event.
    Cycle {
        path: Vec<RuleId>,
        events: Vec<EventRef>,
        world: Option<Assignment>,
    },
    /// Every assignment over `attributes` that lets `subsumed` fire also
    /// lets `subsumer` fire, and `action_map[i]` is the position in the
    /// subsumer's DO that covers the subsumed rule's `i`-th action.
    Subsumption {
        subsumer: RuleId,
        subsumed: RuleId,
        event: EventRef,
        attributes: Vec<AttrKey>,
        checked: u64,
        action_map: Vec<usize>,
        example: Option<Assignment>,
    },
    /// How the triggers of an imported rule were classified.
    Triggers { events: Vec<String>, states: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub severity: Severity,
    pub rules: Vec<RuleId>,
    pub witness: Witness,
    pub message: String,
}

fn summarize(assignment: &Assignment) -> String {
    if assignment.is_empty() {
        return "any world".into();
    }
    assignment
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Witness {
    pub fn summary(&self) -> String {
        match self {
            Witness::World { event, assignments } => format!("{} on {event}", summarize(assignments)),
            Witness::Cycle { path, .. } => {
                let mut names: Vec<&str> = path.iter().map(RuleId::as_str).collect();
                if let Some(first) = path.first() {
                    names.push(first.as_str());
                }
                names.join(" -> ")
            }
            Witness::Subsumption {
                subsumer,
                subsumed,
                checked,
                ..
            } => format!("{subsumed} implies {subsumer} over {checked} assignments"),
            Witness::Triggers { events, states } => {
                format!("events [{}], states [{}]", events.join(", "), states.join(", "))
            }
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rules: Vec<&str> = self.rules.iter().map(RuleId::as_str).collect();
        write!(
            f,
            "{}[{}] {}: {} ({})",
            self.severity,
            self.kind,
            rules.join(", "),
            self.message,
            self.witness.summary()
        )
    }
}

/// One line per diagnostic.
pub fn render(diagnostics: &[Diagnostic]) -> String {
    diagnostics.iter().map(|d| format!("{d}\n")).collect()
}
