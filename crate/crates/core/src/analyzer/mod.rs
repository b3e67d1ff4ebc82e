//! Static checks over rule sets: contradictory rules, trigger loops and
//! redundant rules. Each finding carries a witness that replays in the
//! engine.
//!
//! A rule's WHILE is evaluated after its WHEN event has applied its own
//! effects, so predicates on attributes the event sets are settled before
//! any search; only the rest are enumerated.

mod conflicts;
mod loops;
mod sat;

use std::collections::{BTreeMap, HashSet};
use std::ops::ControlFlow;

use crate::capability::world::compare;
use crate::capability::{CapabilityRegistry, ModelError};
use crate::diagnostic::{Assignment, Diagnostic, DiagnosticKind, Severity, Witness};
use crate::rule::{canonicalize, validate_rule, Rule, RuleId, StatePredicate, Violation};

pub use conflicts::{detect_contradictions, ConflictTable};
pub use loops::detect_loops;
pub use sat::{satisfiable_conjunction, MAX_ASSIGNMENTS};

use conflicts::net_effects;
use sat::{holds, Space};

/// Cycle enumeration stops after this many cycles.
pub const MAX_CYCLES: usize = 10_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AnalyzerError {
    #[error("{size} assignments exceed the enumeration limit of {limit}")]
    DomainTooLarge { size: u128, limit: u128 },
    #[error("rule {rule} is invalid: {}", .violations.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    InvalidRule { rule: RuleId, violations: Vec<Violation> },
    #[error("rule id {0} is used more than once")]
    DuplicateRuleId(RuleId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Validated rules in ascending id order.
pub(crate) fn sorted<'a>(rules: &'a [Rule], registry: &CapabilityRegistry) -> Result<Vec<&'a Rule>, AnalyzerError> {
    let mut seen = HashSet::new();
    for rule in rules {
        let report = validate_rule(rule, registry);
        if !report.is_ok() {
            return Err(AnalyzerError::InvalidRule {
                rule: rule.id.clone(),
                violations: report.violations,
            });
        }
        if !seen.insert(&rule.id) {
            return Err(AnalyzerError::DuplicateRuleId(rule.id.clone()));
        }
    }
    let mut out: Vec<&Rule> = rules.iter().collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

pub(crate) enum Firing {
    Never,
    /// Fires exactly in the worlds satisfying these predicates.
    When(Vec<StatePredicate>),
}

/// WHILE with the WHEN event's own effects substituted in.
pub(crate) fn firing_condition(registry: &CapabilityRegistry, rule: &Rule) -> Result<Firing, AnalyzerError> {
    let cap = registry
        .event(&rule.when_part)
        .ok_or_else(|| ModelError::Reference(rule.when_part.to_string()))?;
    let fixed = net_effects(&cap.effects);
    let mut rest = Vec::new();
    for p in &rule.while_part {
        match fixed.get(&p.key()) {
            Some(v) if compare(v, p.comparator, &p.literal).unwrap_or(false) => {}
            Some(_) => return Ok(Firing::Never),
            None => rest.push(p.clone()),
        }
    }
    Ok(Firing::When(rest))
}

fn fires(firing: &Firing, world: &Assignment) -> bool {
    match firing {
        Firing::Never => false,
        Firing::When(preds) => holds(world, preds),
    }
}

/// Position in `outer` covering each action of `inner`, or `None` when
/// `inner` is not a sub-multiset of `outer`.
fn action_map(outer: &Rule, inner: &Rule) -> Option<Vec<usize>> {
    let mut used = vec![false; outer.do_part.len()];
    let mut map = Vec::with_capacity(inner.do_part.len());
    for a in &inner.do_part {
        let i = (0..outer.do_part.len()).find(|&i| !used[i] && outer.do_part[i] == *a)?;
        used[i] = true;
        map.push(i);
    }
    Some(map)
}

/// Ordered pairs `(A, B)` where B only fires when A does and A performs all
/// of B's actions, so B adds nothing.
pub fn detect_redundancy(rules: &[Rule], registry: &CapabilityRegistry) -> Result<Vec<Diagnostic>, AnalyzerError> {
    let rules = sorted(rules, registry)?;
    let mut conditions = BTreeMap::new();
    for r in &rules {
        conditions.insert(&r.id, firing_condition(registry, r)?);
    }
    let mut out = Vec::new();
    for a in &rules {
        for b in &rules {
            if a.id == b.id || a.when_part != b.when_part {
                continue;
            }
            let Some(map) = action_map(a, b) else { continue };
            let (fa, fb) = (&conditions[&a.id], &conditions[&b.id]);
            let mut referenced = Vec::new();
            for f in [fa, fb] {
                if let Firing::When(preds) = f {
                    referenced.extend(preds.iter().cloned());
                }
            }
            let space = Space::over(registry, &referenced)?;
            let mut checked = 0u64;
            let mut example = None;
            let counterexample = space.for_each(|w| {
                checked += 1;
                if fires(fb, w) {
                    if !fires(fa, w) {
                        return ControlFlow::Break(());
                    }
                    if example.is_none() {
                        example = Some(w.clone());
                    }
                }
                ControlFlow::Continue(())
            });
            if counterexample.is_some() {
                continue;
            }
            let duplicate = canonicalize(a).with_id(b.id.clone()) == canonicalize(b);
            let message = if duplicate {
                format!("{} duplicates {}", b.id, a.id)
            } else {
                format!("{} is subsumed by {}: whenever it fires, {} fires and does the same", b.id, a.id, a.id)
            };
            out.push(Diagnostic {
                kind: DiagnosticKind::Redundancy,
                severity: Severity::Warning,
                rules: vec![a.id.clone(), b.id.clone()],
                witness: Witness::Subsumption {
                    subsumer: a.id.clone(),
                    subsumed: b.id.clone(),
                    event: a.when_part.clone(),
                    attributes: space.keys().to_vec(),
                    checked,
                    action_map: map,
                    example,
                },
                message,
            });
        }
    }
    Ok(out)
}

/// All three checks, contradictions first, then loops, then redundancy.
pub fn analyze(rules: &[Rule], registry: &CapabilityRegistry) -> Result<Vec<Diagnostic>, AnalyzerError> {
    let mut out = detect_contradictions(rules, registry)?;
    out.extend(detect_loops(rules, registry)?);
    out.extend(detect_redundancy(rules, registry)?);
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::capability::{load_registry, AttrKey, Value};
    use crate::dsl::parse_rules;
    use crate::fixtures;

    /// A user whose location ranges over {home, away, office}.
    pub(crate) fn places_registry() -> CapabilityRegistry {
        load_registry(
            r#"{"version": "places", "devices": [{
                "id": "user", "label": "User",
                "attributes": {"location": {"kind": "place", "values": ["home", "away", "office"], "initial": "home"}},
                "capabilities": [{"id": "location", "kind": "state", "attribute": "location"}]
            }]}"#,
        )
        .unwrap()
    }

    fn redundancy(src: &str) -> Vec<Diagnostic> {
        detect_redundancy(&parse_rules(src).unwrap(), &fixtures::smart_home()).unwrap()
    }

    #[test]
    fn narrower_rule_is_redundant() {
        let found = redundancy(
            "DO window_1.close WHEN weather.rain_started\n\
             DO window_1.close WHEN weather.rain_started WHILE alarm.armed = true",
        );
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].rules, vec!["r1".into(), "r2".into()]);
        match &found[0].witness {
            Witness::Subsumption {
                subsumer,
                subsumed,
                attributes,
                checked,
                action_map,
                example,
                ..
            } => {
                assert_eq!((subsumer.as_str(), subsumed.as_str()), ("r1", "r2"));
                assert_eq!(attributes, &vec![AttrKey::new("alarm", "armed")]);
                assert_eq!(*checked, 2);
                assert_eq!(action_map, &vec![0]);
                assert_eq!(
                    example.as_ref().unwrap(),
                    &Assignment::from([(AttrKey::new("alarm", "armed"), Value::Bool(true))])
                );
            }
            other => panic!("unexpected witness {other:?}"),
        }
    }

    #[test]
    fn reordered_while_is_a_mutual_duplicate() {
        let found = redundancy(
            "DO window_1.close WHEN weather.rain_started WHILE alarm.armed = true AND user.location = away\n\
             DO window_1.close WHEN weather.rain_started WHILE user.location = away AND alarm.armed = true",
        );
        assert_eq!(found.len(), 2);
        assert!(found.iter().all(|d| d.message.contains("duplicates")));
    }

    #[test]
    fn different_events_are_never_redundant() {
        assert!(redundancy("DO window_1.close WHEN weather.rain_started\nDO window_1.close WHEN user.left_home").is_empty());
    }

    #[test]
    fn extra_action_breaks_containment() {
        let found = redundancy(
            "DO window_1.close WHEN weather.rain_started\n\
             DO window_1.close THEN window_1.close WHEN weather.rain_started WHILE alarm.armed = true",
        );
        assert!(found.is_empty());
    }

    #[test]
    fn output_ignores_rule_order() {
        let reg = fixtures::smart_home();
        let mut rules = parse_rules(
            "DO window_1.close WHEN window_1.opened\n\
             DO window_1.open WHEN window_1.closed\n\
             DO door_front.open_door WHEN camera_front.person_approaching\n\
             DO door_front.lock WHEN camera_front.person_approaching\n\
             DO door_front.lock WHEN camera_front.person_approaching WHILE weather.raining = true",
        )
        .unwrap();
        let expected = analyze(&rules, &reg).unwrap();
        assert_eq!(expected.len(), 4);
        rules.reverse();
        assert_eq!(analyze(&rules, &reg).unwrap(), expected);
        rules.swap(0, 3);
        assert_eq!(analyze(&rules, &reg).unwrap(), expected);
    }

    #[test]
    fn invalid_rules_are_refused() {
        let reg = fixtures::smart_home();
        let rules = parse_rules("DO alarm.armed WHEN doorbell.buzzed").unwrap();
        assert!(matches!(analyze(&rules, &reg), Err(AnalyzerError::InvalidRule { .. })));
    }
}
