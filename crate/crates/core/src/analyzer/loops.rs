use std::collections::BTreeMap;

use super::{AnalyzerError, MAX_CYCLES};
use crate::analyzer::conflicts::net_effects;
use crate::analyzer::sat::satisfiable_conjunction;
use crate::capability::world::compare;
use crate::capability::{AttrKey, CapabilityRegistry, EventRef, Value};
use crate::diagnostic::{Assignment, Diagnostic, DiagnosticKind, Severity, Witness};
use crate::rule::{Rule, RuleId, StatePredicate};

/// `edges[i]` lists every `j` such that some action of rule `i` emits the
/// WHEN event of rule `j`.
pub(crate) fn trigger_graph(rules: &[&Rule], registry: &CapabilityRegistry) -> Vec<Vec<usize>> {
    rules
        .iter()
        .map(|a| {
            let emitted: Vec<&EventRef> = a
                .do_part
                .iter()
                .filter_map(|act| registry.action(act))
                .flat_map(|cap| cap.emits.iter())
                .collect();
            rules
                .iter()
                .enumerate()
                .filter(|(_, b)| emitted.contains(&&b.when_part))
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

/// Elementary cycles, each starting at its smallest index, in lexicographic
/// order. Stops after `limit` cycles.
pub(crate) fn elementary_cycles(edges: &[Vec<usize>], limit: usize) -> Vec<Vec<usize>> {
    fn walk(
        edges: &[Vec<usize>],
        start: usize,
        v: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        out: &mut Vec<Vec<usize>>,
        limit: usize,
    ) {
        for &w in &edges[v] {
            if out.len() >= limit {
                return;
            }
            if w == start {
                out.push(path.clone());
            } else if w > start && !on_path[w] {
                on_path[w] = true;
                path.push(w);
                walk(edges, start, w, path, on_path, out, limit);
                path.pop();
                on_path[w] = false;
            }
        }
    }

    let mut out = Vec::new();
    let mut on_path = vec![false; edges.len()];
    for start in 0..edges.len() {
        on_path[start] = true;
        let mut path = vec![start];
        walk(edges, start, start, &mut path, &mut on_path, &mut out, limit);
        on_path[start] = false;
    }
    out.sort();
    out.dedup();
    out
}

/// Result of running a cycle symbolically from an unknown world.
enum Walk {
    /// Some WHILE on the cycle is false whatever the starting world.
    Blocked { rule: RuleId, predicate: StatePredicate },
    /// The cycle keeps going from any world meeting these conditions on
    /// attributes the cycle never writes before reading.
    Open(Vec<StatePredicate>),
}

/// Two laps suffice: after the first lap every attribute the cycle writes
/// holds a constant, so later laps repeat the second.
fn walk_cycle(cycle: &[&Rule], registry: &CapabilityRegistry) -> Walk {
    let mut known: BTreeMap<AttrKey, Value> = BTreeMap::new();
    let mut constraints = Vec::new();
    for rule in cycle.iter().chain(cycle.iter()) {
        if let Some(cap) = registry.event(&rule.when_part) {
            known.extend(net_effects(&cap.effects));
        }
        for p in &rule.while_part {
            match known.get(&p.key()) {
                Some(v) => {
                    if !compare(v, p.comparator, &p.literal).unwrap_or(false) {
                        return Walk::Blocked {
                            rule: rule.id.clone(),
                            predicate: p.clone(),
                        };
                    }
                }
                None => constraints.push(p.clone()),
            }
        }
        for action in &rule.do_part {
            if let Some(cap) = registry.action(action) {
                known.extend(net_effects(&cap.effects));
            }
        }
    }
    Walk::Open(constraints)
}

/// Cycles in the trigger graph. A cycle whose own effects or WHILE
/// conditions stop it is a warning; one that can run forever is an error,
/// and its witness world lets the first rule start it.
pub fn detect_loops(rules: &[Rule], registry: &CapabilityRegistry) -> Result<Vec<Diagnostic>, AnalyzerError> {
    let rules = super::sorted(rules, registry)?;
    let edges = trigger_graph(&rules, registry);
    let mut out = Vec::new();
    for cycle in elementary_cycles(&edges, MAX_CYCLES) {
        let members: Vec<&Rule> = cycle.iter().map(|&i| rules[i]).collect();
        let path: Vec<RuleId> = members.iter().map(|r| r.id.clone()).collect();
        let events: Vec<EventRef> = (0..members.len())
            .map(|i| members[(i + 1) % members.len()].when_part.clone())
            .collect();
        let mut implicated = path.clone();
        implicated.sort();

        let route: Vec<String> = path
            .iter()
            .chain(path.first())
            .map(|r| r.to_string())
            .collect();
        let (severity, world, message) = match walk_cycle(&members, registry) {
            Walk::Blocked { rule, predicate } => (
                Severity::Warning,
                None,
                format!("cycle {} is stopped by {rule}: `{predicate}` cannot hold", route.join(" -> ")),
            ),
            Walk::Open(constraints) => match satisfiable_conjunction(&constraints, registry) {
                Ok(Some(w)) => (
                    Severity::Error,
                    Some(w),
                    format!("rules retrigger each other without end: {}", route.join(" -> ")),
                ),
                Ok(None) => (
                    Severity::Warning,
                    None,
                    format!("cycle {} needs an impossible starting world", route.join(" -> ")),
                ),
                // Too many worlds to find a starting point; report the
                // cycle as live without one.
                Err(AnalyzerError::DomainTooLarge { .. }) => (
                    Severity::Error,
                    None::<Assignment>,
                    format!("rules may retrigger each other without end: {}", route.join(" -> ")),
                ),
                Err(e) => return Err(e),
            },
        };
        out.push(Diagnostic {
            kind: DiagnosticKind::Loop,
            severity,
            rules: implicated,
            witness: Witness::Cycle { path, events, world },
            message,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_rules;
    use crate::fixtures;

    fn loops(src: &str) -> Vec<Diagnostic> {
        detect_loops(&parse_rules(src).unwrap(), &fixtures::smart_home()).unwrap()
    }

    #[test]
    fn window_pair_is_a_two_cycle() {
        let found = loops("DO window_1.close WHEN window_1.opened\nDO window_1.open WHEN window_1.closed");
        assert_eq!(found.len(), 1);
        let d = &found[0];
        assert_eq!(d.severity, Severity::Error);
        assert_eq!(
            d.witness,
            Witness::Cycle {
                path: vec!["r1".into(), "r2".into()],
                events: vec![EventRef::new("window_1", "closed"), EventRef::new("window_1", "opened")],
                world: Some(Assignment::new()),
            }
        );
        assert!(d.to_string().contains("r1 -> r2 -> r1"));
    }

    #[test]
    fn self_loop() {
        let found = loops("DO alarm.arm WHEN alarm.armed_on");
        assert_eq!(found.len(), 1);
        assert!(matches!(&found[0].witness, Witness::Cycle { path, .. } if path.len() == 1));
    }

    #[test]
    fn blocked_cycle_is_a_warning() {
        let found = loops(
            "DO window_1.close WHEN window_1.opened WHILE alarm.armed = true\n\
             DO window_1.open THEN alarm.disarm WHEN window_1.closed",
        );
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].severity, Severity::Warning);
    }

    #[test]
    fn three_rule_cycle_across_devices() {
        let found = loops(
            "DO window_1.open WHEN alarm.armed_on\n\
             DO door_front.open_door WHEN window_1.opened\n\
             DO alarm.arm WHEN door_front.opened",
        );
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].severity, Severity::Error);
        assert!(matches!(&found[0].witness, Witness::Cycle { path, .. } if path.len() == 3));
    }

    #[test]
    fn live_cycle_reports_its_entry_condition() {
        let found = loops(
            "DO window_1.close WHEN window_1.opened WHILE weather.raining = true\n\
             DO window_1.open WHEN window_1.closed",
        );
        let Witness::Cycle { world, .. } = &found[0].witness else { panic!() };
        assert_eq!(
            world.as_ref().unwrap(),
            &Assignment::from([(AttrKey::new("weather", "raining"), Value::Bool(true))])
        );
    }

    #[test]
    fn acyclic_sets_have_no_loops() {
        assert!(loops(
            "DO camera_front.start_recording WHEN doorbell.buzzed\n\
             DO window_1.close THEN window_2.close WHEN weather.rain_started WHILE user.location != home_street\n\
             DO alarm.arm WHEN window_1.closed"
        )
        .is_empty());
    }

    #[test]
    fn cycle_enumeration_on_a_complete_graph() {
        // K3 with self-loops: 3 self-loops, 3 two-cycles, 2 three-cycles.
        let edges = vec![vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 2]];
        assert_eq!(elementary_cycles(&edges, usize::MAX).len(), 8);
        assert_eq!(elementary_cycles(&edges, 5).len(), 5);
    }
}
