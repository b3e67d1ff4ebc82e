// Import of flat IF <triggers> THEN <actions> rules, where events and states
// are mixed in one trigger list.

use serde::{Deserialize, Serialize};

use crate::capability::{ActionRef, AttributeDomain, CapabilityKind, CapabilityRegistry, EventRef, Value};
use crate::diagnostic::{Diagnostic, DiagnosticKind, Severity, Witness};
use crate::rule::{Comparator, Rule, RuleId, StatePredicate};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegacyTrigger {
    pub device: String,
    pub capability: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

impl LegacyTrigger {
    pub fn new(device: &str, capability: &str, value: Option<Value>) -> Self {
        LegacyTrigger {
            device: device.to_owned(),
            capability: capability.to_owned(),
            value,
        }
    }

    fn name(&self) -> String {
        format!("{}.{}", self.device, self.capability)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegacyRule {
    pub triggers: Vec<LegacyTrigger>,
    pub actions: Vec<ActionRef>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerClass {
    Event,
    State,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerClassification {
    pub trigger: String,
    pub class: TriggerClass,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub converted: Option<Rule>,
    pub trigger_classification: Vec<TriggerClassification>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ImportError {
    #[error("legacy document is malformed at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("legacy rule needs at least one trigger and one action")]
    Empty,
    #[error("unresolved reference `{0}`")]
    Reference(String),
    #[error("`{0}` is an action and cannot be a trigger")]
    ActionAsTrigger(String),
    #[error("`{0}` is not an action")]
    NotAnAction(String),
    #[error("state trigger `{0}` needs a value")]
    MissingValue(String),
    #[error("event trigger `{0}` cannot carry a value")]
    UnexpectedValue(String),
    #[error("value {value} is not legal for `{trigger}`")]
    Domain { trigger: String, value: Value },
}

/// Reads a legacy rules document: a JSON list of `{triggers, actions}`.
pub fn load_legacy(source: &str) -> Result<Vec<LegacyRule>, ImportError> {
    serde_json::from_str(source).map_err(|e| ImportError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Classifies each trigger by its capability kind and, when exactly one
/// trigger is an event, converts the rule: that event becomes WHEN and every
/// state trigger becomes an equality predicate.
///
/// No event at all is reported as a flipped trigger; two or more as a time
/// window fallacy. Neither case converts.
pub fn import_legacy(id: RuleId, legacy: &LegacyRule, registry: &CapabilityRegistry) -> Result<ImportReport, ImportError> {
    if legacy.triggers.is_empty() || legacy.actions.is_empty() {
        return Err(ImportError::Empty);
    }
    let mut classification = Vec::with_capacity(legacy.triggers.len());
    let mut events = Vec::new();
    let mut states = Vec::new();
    for t in &legacy.triggers {
        let cap = registry
            .capability(&t.device, &t.capability)
            .ok_or_else(|| ImportError::Reference(t.name()))?;
        let class = match cap.kind {
            CapabilityKind::Event => {
                if t.value.is_some() {
                    return Err(ImportError::UnexpectedValue(t.name()));
                }
                events.push(EventRef::new(&t.device, &t.capability));
                TriggerClass::Event
            }
            CapabilityKind::State => {
                let attribute = cap.attribute.as_deref().expect("state capabilities name an attribute");
                let domain = &registry
                    .attribute(&t.device, attribute)
                    .expect("registry references resolve")
                    .domain;
                let value = match (&t.value, domain) {
                    (Some(v), _) => v.clone(),
                    (None, AttributeDomain::Boolean) => Value::Bool(true),
                    (None, _) => return Err(ImportError::MissingValue(t.name())),
                };
                if !domain.contains(&value) {
                    return Err(ImportError::Domain {
                        trigger: t.name(),
                        value,
                    });
                }
                states.push(StatePredicate::new(&t.device, attribute, Comparator::Eq, value));
                TriggerClass::State
            }
            CapabilityKind::Action => return Err(ImportError::ActionAsTrigger(t.name())),
        };
        classification.push(TriggerClassification {
            trigger: t.name(),
            class,
        });
    }
    for a in &legacy.actions {
        if registry.action(a).is_none() {
            return Err(match registry.capability(&a.device, &a.capability) {
                Some(_) => ImportError::NotAnAction(a.to_string()),
                None => ImportError::Reference(a.to_string()),
            });
        }
    }

    let witness = || Witness::Triggers {
        events: classification
            .iter()
            .filter(|c| c.class == TriggerClass::Event)
            .map(|c| c.trigger.clone())
            .collect(),
        states: classification
            .iter()
            .filter(|c| c.class == TriggerClass::State)
            .map(|c| c.trigger.clone())
            .collect(),
    };
    let mut diagnostics = Vec::new();
    let converted = match events.len() {
        1 => Some(Rule {
            id: id.clone(),
            do_part: legacy.actions.clone(),
            when_part: events.remove(0),
            while_part: states,
        }),
        0 => {
            diagnostics.push(Diagnostic {
                kind: DiagnosticKind::FlippedTrigger,
                severity: Severity::Error,
                rules: vec![id.clone()],
                witness: witness(),
                message: "every trigger is a state, so there is no moment at which the rule fires".into(),
            });
            None
        }
        _ => {
            diagnostics.push(Diagnostic {
                kind: DiagnosticKind::TimeWindowFallacy,
                severity: Severity::Error,
                rules: vec![id.clone()],
                witness: witness(),
                message: format!(
                    "{} instantaneous events are conjoined; they never happen at the same instant",
                    events.len()
                ),
            });
            None
        }
    };
    Ok(ImportReport {
        converted,
        trigger_classification: classification,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_rule, print_rule};
    use crate::fixtures;

    fn legacy(triggers: Vec<LegacyTrigger>) -> LegacyRule {
        LegacyRule {
            triggers,
            actions: vec![ActionRef::new("window_1", "close"), ActionRef::new("window_2", "close")],
        }
    }

    #[test]
    fn rain_while_away_converts() {
        let report = import_legacy(
            RuleId::positional(1),
            &legacy(vec![
                LegacyTrigger::new("weather", "rain_started", None),
                LegacyTrigger::new("user", "location", Some(Value::symbol("away"))),
            ]),
            &fixtures::smart_home(),
        )
        .unwrap();
        assert!(report.diagnostics.is_empty());
        assert_eq!(
            report.trigger_classification.iter().map(|c| c.class).collect::<Vec<_>>(),
            vec![TriggerClass::Event, TriggerClass::State]
        );
        let rule = report.converted.unwrap();
        assert_eq!(
            print_rule(&rule),
            "DO window_1.close THEN window_2.close WHEN weather.rain_started WHILE user.location = away"
        );
    }

    #[test]
    fn two_events_are_a_time_window_fallacy() {
        let report = import_legacy(
            RuleId::positional(1),
            &legacy(vec![
                LegacyTrigger::new("weather", "rain_started", None),
                LegacyTrigger::new("user", "left_home", None),
            ]),
            &fixtures::smart_home(),
        )
        .unwrap();
        assert!(report.converted.is_none());
        assert_eq!(report.diagnostics.len(), 1);
        assert_eq!(report.diagnostics[0].kind, DiagnosticKind::TimeWindowFallacy);
    }

    #[test]
    fn states_only_is_a_flipped_trigger() {
        let report = import_legacy(
            RuleId::positional(1),
            &legacy(vec![LegacyTrigger::new("alarm", "armed", Some(Value::Bool(true)))]),
            &fixtures::smart_home(),
        )
        .unwrap();
        assert!(report.converted.is_none());
        assert_eq!(report.diagnostics[0].kind, DiagnosticKind::FlippedTrigger);
    }

    #[test]
    fn boolean_state_defaults_to_true() {
        let report = import_legacy(
            RuleId::positional(1),
            &legacy(vec![
                LegacyTrigger::new("window_1", "opened", None),
                LegacyTrigger::new("alarm", "armed", None),
            ]),
            &fixtures::smart_home(),
        )
        .unwrap();
        let expected = parse_rule("DO window_1.close THEN window_2.close WHEN window_1.opened WHILE alarm.armed = true")
            .unwrap()
            .rule;
        assert_eq!(report.converted.unwrap(), expected);
    }

    #[test]
    fn errors() {
        let reg = fixtures::smart_home();
        let id = RuleId::positional(1);
        let with = |t: LegacyTrigger| import_legacy(id.clone(), &legacy(vec![t]), &reg).unwrap_err();
        assert!(matches!(with(LegacyTrigger::new("toaster", "popped", None)), ImportError::Reference(_)));
        assert!(matches!(with(LegacyTrigger::new("alarm", "arm", None)), ImportError::ActionAsTrigger(_)));
        assert!(matches!(with(LegacyTrigger::new("user", "location", None)), ImportError::MissingValue(_)));
        assert!(matches!(
            with(LegacyTrigger::new("user", "location", Some(Value::symbol("moon")))),
            ImportError::Domain { .. }
        ));
        assert!(matches!(
            with(LegacyTrigger::new("doorbell", "buzzed", Some(Value::Bool(true)))),
            ImportError::UnexpectedValue(_)
        ));
        let bad_action = LegacyRule {
            triggers: vec![LegacyTrigger::new("doorbell", "buzzed", None)],
            actions: vec![ActionRef::new("doorbell", "buzzed")],
        };
        assert!(matches!(import_legacy(id.clone(), &bad_action, &reg), Err(ImportError::NotAnAction(_))));
        let empty = LegacyRule { triggers: vec![], actions: vec![] };
        assert_eq!(import_legacy(id, &empty, &reg).unwrap_err(), ImportError::Empty);
    }

    #[test]
    fn legacy_document_format() {
        let src = r#"[{"triggers": [{"device": "weather", "capability": "rain_started"},
                                    {"device": "user", "capability": "location", "value": "away"}],
                       "actions": [{"device": "window_1", "capability": "close"}]}]"#;
        let rules = load_legacy(src).unwrap();
        assert_eq!(rules[0].triggers[1].value, Some(Value::symbol("away")));
        assert!(matches!(load_legacy("[{\"triggers\": []"), Err(ImportError::Syntax { .. })));
        assert!(matches!(
            load_legacy(r#"[{"triggers": [], "actions": [], "when": 1}]"#),
            Err(ImportError::Syntax { .. })
        ));
    }

    // Conversion happens exactly when one trigger is an event, over every
    // trigger list of up to three elements drawn from a small pool.
    #[test]
    fn converts_iff_exactly_one_event() {
        let reg = fixtures::smart_home();
        let pool = [
            LegacyTrigger::new("weather", "rain_started", None),
            LegacyTrigger::new("user", "left_home", None),
            LegacyTrigger::new("alarm", "armed", Some(Value::Bool(true))),
            LegacyTrigger::new("user", "location", Some(Value::symbol("away"))),
        ];
        let mut lists: Vec<Vec<LegacyTrigger>> = Vec::new();
        for a in 0..pool.len() {
            lists.push(vec![pool[a].clone()]);
            for b in 0..pool.len() {
                lists.push(vec![pool[a].clone(), pool[b].clone()]);
                for c in 0..pool.len() {
                    lists.push(vec![pool[a].clone(), pool[b].clone(), pool[c].clone()]);
                }
            }
        }
        assert_eq!(lists.len(), 4 + 16 + 64);
        for triggers in lists {
            let events = triggers.iter().filter(|t| t.value.is_none()).count();
            let report = import_legacy(RuleId::positional(1), &legacy(triggers), &reg).unwrap();
            assert_eq!(report.converted.is_some(), events == 1);
            assert_eq!(report.diagnostics.is_empty(), events == 1);
        }
    }
}
