use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{firing_condition, AnalyzerError, Firing};
use crate::analyzer::sat::satisfiable_conjunction;
use crate::capability::{ActionRef, AttrKey, CapabilityKind, CapabilityRegistry, StateEffect, Value};
use crate::diagnostic::{Diagnostic, DiagnosticKind, Severity, Witness};
use crate::rule::Rule;

/// Net result of applying `effects` in order: the last write per attribute.
pub(crate) fn net_effects(effects: &[StateEffect]) -> BTreeMap<AttrKey, Value> {
    effects.iter().map(|e| (e.key(), e.value.clone())).collect()
}

/// For each attribute, the unordered pairs of actions that leave it with
/// different values.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConflictTable {
    pairs: BTreeMap<AttrKey, BTreeSet<(ActionRef, ActionRef)>>,
}

impl ConflictTable {
    pub fn from_registry(registry: &CapabilityRegistry) -> Self {
        let mut writers: BTreeMap<AttrKey, Vec<(ActionRef, Value)>> = BTreeMap::new();
        for cap in registry.capabilities().filter(|c| c.kind == CapabilityKind::Action) {
            let action = ActionRef::new(&cap.device, &cap.id);
            for (key, value) in net_effects(&cap.effects) {
                writers.entry(key).or_default().push((action.clone(), value));
            }
        }
        let mut pairs: BTreeMap<AttrKey, BTreeSet<(ActionRef, ActionRef)>> = BTreeMap::new();
        for (key, list) in writers {
            for (a, va) in &list {
                for (b, vb) in &list {
                    if va != vb {
                        pairs.entry(key.clone()).or_default().insert((a.clone(), b.clone()));
                    }
                }
            }
        }
        ConflictTable { pairs }
    }

    /// Attributes on which `a` and `b` disagree.
    pub fn conflicts(&self, a: &ActionRef, b: &ActionRef) -> Vec<&AttrKey> {
        let pair = (a.clone(), b.clone());
        self.pairs
            .iter()
            .filter(|(_, set)| set.contains(&pair))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.pairs
            .values()
            .all(|set| set.iter().all(|(a, b)| set.contains(&(b.clone(), a.clone()))))
    }
}

/// Pairs of rules that can fire on the same event in the same world and
/// drive some attribute to different values.
pub fn detect_contradictions(rules: &[Rule], registry: &CapabilityRegistry) -> Result<Vec<Diagnostic>, AnalyzerError> {
    let rules = super::sorted(rules, registry)?;
    let table = ConflictTable::from_registry(registry);
    let mut out = Vec::new();
    for (i, a) in rules.iter().enumerate() {
        for b in &rules[i + 1..] {
            if a.when_part != b.when_part {
                continue;
            }
            let mut conflicting = BTreeSet::new();
            for x in &a.do_part {
                for y in &b.do_part {
                    conflicting.extend(table.conflicts(x, y));
                }
            }
            if conflicting.is_empty() {
                continue;
            }
            let (Firing::When(pa), Firing::When(pb)) = (firing_condition(registry, a)?, firing_condition(registry, b)?)
            else {
                continue;
            };
            let joint: Vec<_> = pa.into_iter().chain(pb).collect();
            let Some(world) = satisfiable_conjunction(&joint, registry)? else {
                continue;
            };
            let keys: Vec<String> = conflicting.iter().map(|k| k.to_string()).collect();
            out.push(Diagnostic {
                kind: DiagnosticKind::Contradiction,
                severity: Severity::Error,
                rules: vec![a.id.clone(), b.id.clone()],
                message: format!(
                    "{} and {} both fire on {} and set {} to different values",
                    a.id,
                    b.id,
                    a.when_part,
                    keys.join(", ")
                ),
                witness: Witness::World {
                    event: a.when_part.clone(),
                    assignments: world,
                },
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_rules;
    use crate::fixtures;

    #[test]
    fn table_is_symmetric_and_registry_derived() {
        let reg = fixtures::smart_home();
        let table = ConflictTable::from_registry(&reg);
        assert!(table.is_symmetric());
        let open = ActionRef::new("door_front", "open_door");
        let lock = ActionRef::new("door_front", "lock");
        assert_eq!(table.conflicts(&open, &lock), vec![&AttrKey::new("door_front", "locked")]);
        assert!(table.conflicts(&open, &open).is_empty());
        assert!(table
            .conflicts(&ActionRef::new("window_1", "close"), &ActionRef::new("window_2", "open"))
            .is_empty());
    }

    #[test]
    fn open_versus_lock_at_home() {
        let reg = fixtures::smart_home();
        let rules = parse_rules(
            "DO door_front.open_door WHEN camera_front.person_approaching WHILE user.location = home_street\n\
             DO door_front.lock WHEN camera_front.person_approaching",
        )
        .unwrap();
        let found = detect_contradictions(&rules, &reg).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].rules, vec!["r1".into(), "r2".into()]);
        assert_eq!(
            found[0].witness,
            Witness::World {
                event: crate::capability::EventRef::new("camera_front", "person_approaching"),
                assignments: [(AttrKey::new("user", "location"), Value::symbol("home_street"))].into(),
            }
        );
    }

    #[test]
    fn disjoint_conditions_do_not_contradict() {
        let reg = fixtures::smart_home();
        let rules = parse_rules(
            "DO door_front.open_door WHEN camera_front.person_approaching WHILE user.location = home_street\n\
             DO door_front.lock WHEN camera_front.person_approaching WHILE user.location != home_street",
        )
        .unwrap();
        assert!(detect_contradictions(&rules, &reg).unwrap().is_empty());
    }

    #[test]
    fn single_rule_has_no_pairs() {
        let reg = fixtures::smart_home();
        let rules = parse_rules("DO door_front.open_door WHEN camera_front.person_approaching").unwrap();
        assert!(detect_contradictions(&rules, &reg).unwrap().is_empty());
    }

    #[test]
    fn event_effects_settle_conditions() {
        // window_1.opened sets window_1.open, so r2 can never fire.
        let reg = fixtures::smart_home();
        let rules = parse_rules(
            "DO alarm.arm WHEN window_1.opened\n\
             DO alarm.disarm WHEN window_1.opened WHILE window_1.open = false",
        )
        .unwrap();
        assert!(detect_contradictions(&rules, &reg).unwrap().is_empty());
    }
}
