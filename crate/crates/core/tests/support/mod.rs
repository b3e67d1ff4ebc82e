//! Random rule generators and brute-force oracles shared by the integration
//! and acceptance tests. The oracles only use the engine and the raw
//! registry, never the analyzer.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sensation_core::capability::{
    ActionRef, AttrKey, AttributeDomain, CapabilityKind, CapabilityRegistry, EventRef, StateEffect, Value, WorldState,
};
use sensation_core::capability::eval_predicate;
use sensation_core::engine::{dispatch_event, EngineConfig};
use sensation_core::rule::{Comparator, Rule, RuleId, StatePredicate};

pub struct Gen {
    pub rng: ChaCha8Rng,
    events: Vec<EventRef>,
    actions: Vec<ActionRef>,
    attrs: Vec<(AttrKey, AttributeDomain)>,
}

impl Gen {
    pub fn new(registry: &CapabilityRegistry, seed: u64) -> Self {
        let mut events = Vec::new();
        let mut actions = Vec::new();
        for c in registry.capabilities() {
            match c.kind {
                CapabilityKind::Event => events.push(EventRef::new(&c.device, &c.id)),
                CapabilityKind::Action => actions.push(ActionRef::new(&c.device, &c.id)),
                CapabilityKind::State => {}
            }
        }
        let attrs = registry
            .attribute_keys()
            .map(|(k, a)| (k, a.domain.clone()))
            .collect();
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            events,
            actions,
            attrs,
        }
    }

    pub fn event(&mut self) -> EventRef {
        self.events.choose(&mut self.rng).unwrap().clone()
    }

    pub fn action(&mut self) -> ActionRef {
        self.actions.choose(&mut self.rng).unwrap().clone()
    }

    pub fn predicate(&mut self) -> StatePredicate {
        let (key, domain) = self.attrs.choose(&mut self.rng).unwrap().clone();
        let values = domain.values();
        let literal = values.choose(&mut self.rng).unwrap().clone();
        let comparator = if domain.is_ordered() {
            *Comparator::ALL.choose(&mut self.rng).unwrap()
        } else if self.rng.gen_bool(0.6) {
            Comparator::Eq
        } else {
            Comparator::Ne
        };
        StatePredicate::new(&key.device, &key.attribute, comparator, literal)
    }

    pub fn rule(&mut self, id: &str, when: EventRef, max_actions: usize, max_preds: usize) -> Rule {
        let n = self.rng.gen_range(1..=max_actions);
        let do_part = (0..n).map(|_| self.action()).collect();
        let m = self.rng.gen_range(0..=max_preds);
        let while_part = (0..m).map(|_| self.predicate()).collect();
        Rule::new(id, do_part, when, while_part)
    }

    /// Two rules, usually sharing WHEN, often with B derived from A so that
    /// subsumption and conflicts show up regularly.
    pub fn pair(&mut self) -> (Rule, Rule) {
        let when = self.event();
        let a = self.rule("r1", when.clone(), 3, 3);
        let b_when = if self.rng.gen_bool(0.85) { when } else { self.event() };
        let b = match self.rng.gen_range(0..3) {
            0 => self.rule("r2", b_when, 3, 3),
            1 => {
                // Fewer actions, more conditions.
                let mut b = a.clone().with_id(RuleId::from("r2"));
                b.when_part = b_when;
                b.do_part.shuffle(&mut self.rng);
                let keep = self.rng.gen_range(1..=b.do_part.len());
                b.do_part.truncate(keep);
                let extra = self.rng.gen_range(0..=2);
                for _ in 0..extra {
                    let p = self.predicate();
                    b.while_part.push(p);
                }
                b
            }
            _ => {
                // Same shape with one action swapped.
                let mut b = a.clone().with_id(RuleId::from("r2"));
                b.when_part = b_when;
                let i = self.rng.gen_range(0..b.do_part.len());
                b.do_part[i] = self.action();
                b.while_part.retain(|_| self.rng.gen_bool(0.7));
                b
            }
        };
        (a, b)
    }
}

/// Attributes read by any WHILE of `rules`.
pub fn referenced(rules: &[&Rule]) -> Vec<AttrKey> {
    let mut keys: Vec<AttrKey> = rules.iter().flat_map(|r| r.while_part.iter().map(|p| p.key())).collect();
    keys.sort();
    keys.dedup();
    keys
}

pub fn domain_product(registry: &CapabilityRegistry, keys: &[AttrKey]) -> u64 {
    keys.iter().map(|k| registry.domain(k).unwrap().size()).product()
}

/// Every world that agrees with the initial world outside `keys`.
pub fn worlds(registry: &CapabilityRegistry, keys: &[AttrKey]) -> Vec<WorldState> {
    let mut out = vec![registry.initial_world()];
    for k in keys {
        let values = registry.domain(k).unwrap().values();
        out = out
            .into_iter()
            .flat_map(|w| {
                values.iter().map(move |v| {
                    let mut w = w.clone();
                    w.assignments.insert(k.clone(), v.clone());
                    w
                })
            })
            .collect();
    }
    out
}

pub fn with_assignments(registry: &CapabilityRegistry, assignments: &BTreeMap<AttrKey, Value>) -> WorldState {
    let mut w = registry.initial_world();
    for (k, v) in assignments {
        w.assignments.insert(k.clone(), v.clone());
    }
    w
}

/// Ids of the rules that fire when `event` arrives in `world`.
pub fn fired(registry: &CapabilityRegistry, world: &WorldState, rules: &[Rule], event: &EventRef) -> Vec<RuleId> {
    dispatch_event(registry, world, rules, event, 0, &EngineConfig::default())
        .unwrap()
        .fired
        .into_iter()
        .map(|f| f.rule)
        .collect()
}

fn final_values(effects: &[StateEffect]) -> BTreeMap<AttrKey, Value> {
    let mut out = BTreeMap::new();
    for e in effects {
        out.insert(AttrKey::new(&e.device, &e.attribute), e.value.clone());
    }
    out
}

/// Whether some action of `a` and some action of `b` leave an attribute
/// with different values.
pub fn actions_conflict(registry: &CapabilityRegistry, a: &Rule, b: &Rule) -> bool {
    a.do_part.iter().any(|x| {
        b.do_part.iter().any(|y| {
            let fx = final_values(&registry.action(x).unwrap().effects);
            let fy = final_values(&registry.action(y).unwrap().effects);
            fx.iter().any(|(k, v)| fy.get(k).is_some_and(|w| w != v))
        })
    })
}

/// Both rules fire together in some world and their actions conflict.
pub fn oracle_contradiction(registry: &CapabilityRegistry, a: &Rule, b: &Rule) -> bool {
    if a.when_part != b.when_part || !actions_conflict(registry, a, b) {
        return false;
    }
    let pair = [a.clone(), b.clone()];
    worlds(registry, &referenced(&[a, b]))
        .iter()
        .any(|w| fired(registry, w, &pair, &a.when_part).len() == 2)
}

fn counts(actions: &[ActionRef]) -> BTreeMap<&ActionRef, usize> {
    let mut m = BTreeMap::new();
    for a in actions {
        *m.entry(a).or_insert(0) += 1;
    }
    m
}

/// Wherever `b` fires, `a` fires too, and `a` does everything `b` does.
pub fn oracle_redundant(registry: &CapabilityRegistry, a: &Rule, b: &Rule) -> bool {
    if a.id == b.id || a.when_part != b.when_part {
        return false;
    }
    let ca = counts(&a.do_part);
    if counts(&b.do_part).iter().any(|(x, n)| ca.get(x).copied().unwrap_or(0) < *n) {
        return false;
    }
    let (sa, sb) = ([a.clone()], [b.clone()]);
    worlds(registry, &referenced(&[a, b])).iter().all(|w| {
        fired(registry, w, &sb, &b.when_part).is_empty() || !fired(registry, w, &sa, &a.when_part).is_empty()
    })
}

/// Straightforward breadth-first interpreter without a depth bound.
/// Returns whether the cascade started by `event` dies out within
/// `max_depth` levels.
pub fn quiesces(registry: &CapabilityRegistry, rules: &[Rule], world: &WorldState, event: &EventRef, max_depth: usize) -> bool {
    let mut world = world.clone();
    let mut sorted: Vec<&Rule> = rules.iter().collect();
    sorted.sort_by(|x, y| x.id.cmp(&y.id));
    let mut queue = vec![event.clone()];
    let mut depth = 0;
    while !queue.is_empty() {
        if depth > max_depth {
            return false;
        }
        let mut next = Vec::new();
        for e in queue {
            for eff in &registry.event(&e).unwrap().effects {
                world.assignments.insert(AttrKey::new(&eff.device, &eff.attribute), eff.value.clone());
            }
            let matching: Vec<&Rule> = sorted
                .iter()
                .copied()
                .filter(|r| r.when_part == e && r.while_part.iter().all(|p| eval_predicate(&world, p).unwrap()))
                .collect();
            for r in matching {
                for a in &r.do_part {
                    let cap = registry.action(a).unwrap();
                    for eff in &cap.effects {
                        world.assignments.insert(AttrKey::new(&eff.device, &eff.attribute), eff.value.clone());
                    }
                    next.extend(cap.emits.iter().cloned());
                }
            }
        }
        queue = next;
        depth += 1;
    }
    true
}

const KEYWORDS: [&str; 6] = ["DO", "THEN", "WHEN", "WHILE", "AND", "OR"];

fn ident(rng: &mut ChaCha8Rng) -> String {
    loop {
        let len = rng.gen_range(1..8);
        let mut s = String::new();
        s.push(*b"abcdefghijklmnopqrstuvwxyz_ABCXYZ".choose(rng).unwrap() as char);
        for _ in 1..len {
            s.push(*b"abcdefghijklmnopqrstuvwxyz_0123456789".choose(rng).unwrap() as char);
        }
        let upper = s.to_ascii_uppercase();
        if !KEYWORDS.contains(&upper.as_str()) && upper != "TRUE" && upper != "FALSE" {
            return s;
        }
    }
}

fn literal(rng: &mut ChaCha8Rng) -> Value {
    match rng.gen_range(0..4) {
        0 => Value::Bool(rng.gen()),
        1 => Value::Int(rng.gen_range(-1_000_000..1_000_000)),
        2 => Value::Symbol(ident(rng)),
        _ => {
            let len = rng.gen_range(0..10);
            let s: String = (0..len)
                .map(|_| *[' ', '"', '\\', 'x', 'é', '\t', '#', 'D', 'O', '.'].choose(rng).unwrap())
                .collect();
            Value::Symbol(s)
        }
    }
}

/// A syntactically valid rule with arbitrary names.
pub fn random_syntax_rule(rng: &mut ChaCha8Rng) -> Rule {
    let n = rng.gen_range(1..4);
    let do_part = (0..n).map(|_| ActionRef::new(&ident(rng), &ident(rng))).collect();
    let when = EventRef::new(&ident(rng), &ident(rng));
    let m = rng.gen_range(0..4);
    let while_part = (0..m)
        .map(|_| {
            let cmp = *Comparator::ALL.choose(rng).unwrap();
            StatePredicate::new(&ident(rng), &ident(rng), cmp, literal(rng))
        })
        .collect();
    Rule::new("r1", do_part, when, while_part)
}

/// Random bytes, sometimes spliced into a printed rule.
pub fn fuzz_input(rng: &mut ChaCha8Rng, seed_text: &str) -> Vec<u8> {
    let len = rng.gen_range(0..64);
    let noise: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
    match rng.gen_range(0..3) {
        0 => noise,
        1 => {
            let mut bytes = seed_text.as_bytes().to_vec();
            for _ in 0..rng.gen_range(1..4) {
                if bytes.is_empty() {
                    break;
                }
                let i = rng.gen_range(0..bytes.len());
                bytes[i] = rng.gen();
            }
            bytes
        }
        _ => {
            let mut bytes = seed_text.as_bytes().to_vec();
            let cut = rng.gen_range(0..=bytes.len());
            bytes.truncate(cut);
            bytes.extend(noise);
            bytes
        }
    }
}
