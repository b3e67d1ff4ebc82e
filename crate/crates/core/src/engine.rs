//! Deterministic execution of rules over a timestamped stimulus timeline.
//!
//! Stimuli are processed in timeline order. An event first applies its own
//! intrinsic effects; then every rule whose WHEN names the event and whose
//! WHILE holds on that snapshot is selected, and the selected rules run in
//! ascending id order. Each action applies its effects immediately and
//! queues the events it emits one depth level deeper. Depth levels are
//! processed breadth-first. If the cascade would fire a rule beyond
//! `max_cascade_depth`, the stimulus ends with a `LoopAborted` marker.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::capability::{
    eval_predicate, ActionRef, CapabilityRegistry, EventRef, ModelError, StateEffect, Value, WorldState,
};
use crate::rule::{validate_rule, Rule, RuleId, Violation};

pub const DEFAULT_MAX_CASCADE_DEPTH: usize = 16;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("rule {rule} is invalid: {}", .violations.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    Validation { rule: RuleId, violations: Vec<Violation> },
    #[error("rule id {0} is used more than once")]
    DuplicateRuleId(RuleId),
    #[error("stimulus {index} is out of timestamp order")]
    UnsortedTimeline { index: usize },
    #[error("stimulus {index}: {message}")]
    Timeline { index: usize, message: String },
    #[error("depth {depth} exceeds the cascade bound {max}")]
    DepthExceeded { depth: usize, max: usize },
    #[error("max_cascade_depth must be at least 1")]
    InvalidConfig,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Event { event: EventRef, args: BTreeMap<String, Value> },
    SetState(StateEffect),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StimulusDoc", into = "StimulusDoc")]
pub struct Stimulus {
    pub timestamp: i64,
    pub payload: Payload,
}

impl Stimulus {
    pub fn event(timestamp: i64, device: &str, capability: &str) -> Self {
        Stimulus {
            timestamp,
            payload: Payload::Event {
                event: EventRef::new(device, capability),
                args: BTreeMap::new(),
            },
        }
    }

    pub fn set(timestamp: i64, device: &str, attribute: &str, value: impl Into<Value>) -> Self {
        Stimulus {
            timestamp,
            payload: Payload::SetState(StateEffect::new(device, attribute, value)),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StimulusDoc {
    t: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    event: Option<EventRef>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    args: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    set: Option<StateEffect>,
}

impl TryFrom<StimulusDoc> for Stimulus {
    type Error = String;

    fn try_from(doc: StimulusDoc) -> Result<Self, Self::Error> {
        let payload = match (doc.event, doc.set) {
            (Some(event), None) => Payload::Event { event, args: doc.args },
            (None, Some(effect)) if doc.args.is_empty() => Payload::SetState(effect),
            (None, Some(_)) => return Err("`args` only applies to events".into()),
            _ => return Err("a stimulus has exactly one of `event` or `set`".into()),
        };
        Ok(Stimulus {
            timestamp: doc.t,
            payload,
        })
    }
}

impl From<Stimulus> for StimulusDoc {
    fn from(s: Stimulus) -> Self {
        match s.payload {
            Payload::Event { event, args } => StimulusDoc {
                t: s.timestamp,
                event: Some(event),
                args,
                set: None,
            },
            Payload::SetState(effect) => StimulusDoc {
                t: s.timestamp,
                event: None,
                args: BTreeMap::new(),
                set: Some(effect),
            },
        }
    }
}

/// Stimuli in non-decreasing timestamp order; equal timestamps keep their
/// input order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Stimulus>", into = "Vec<Stimulus>")]
pub struct Timeline {
    stimuli: Vec<Stimulus>,
}

impl Timeline {
    /// Rejects out-of-order input instead of sorting it.
    pub fn new(stimuli: Vec<Stimulus>) -> Result<Self, EngineError> {
        if let Some(i) = stimuli.windows(2).position(|w| w[0].timestamp > w[1].timestamp) {
            return Err(EngineError::UnsortedTimeline { index: i + 1 });
        }
        Ok(Timeline { stimuli })
    }

    pub fn stimuli(&self) -> &[Stimulus] {
        &self.stimuli
    }

    pub fn from_json(source: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(source)
    }
}

impl TryFrom<Vec<Stimulus>> for Timeline {
    type Error = String;

    fn try_from(stimuli: Vec<Stimulus>) -> Result<Self, Self::Error> {
        Timeline::new(stimuli).map_err(|e| e.to_string())
    }
}

impl From<Timeline> for Vec<Stimulus> {
    fn from(t: Timeline) -> Self {
        t.stimuli
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub max_cascade_depth: usize,
}

impl EngineConfig {
    pub fn new(max_cascade_depth: usize) -> Result<Self, EngineError> {
        if max_cascade_depth == 0 {
            return Err(EngineError::InvalidConfig);
        }
        Ok(EngineConfig { max_cascade_depth })
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_cascade_depth: DEFAULT_MAX_CASCADE_DEPTH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEntry {
    Fire {
        t: i64,
        depth: usize,
        rule: RuleId,
        event: EventRef,
        actions: Vec<ActionRef>,
        effects: Vec<StateEffect>,
    },
    /// The cascade for the stimulus at `t` was cut after `depth`; `chain`
    /// lists the rules leading to the firing that would have exceeded it.
    LoopAborted { t: i64, depth: usize, chain: Vec<RuleId> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionTrace {
    pub entries: Vec<TraceEntry>,
    pub final_world: WorldState,
}

impl EmissionTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("traces always serialize")
    }

    pub fn fires(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(|e| matches!(e, TraceEntry::Fire { .. }))
    }

    pub fn loop_aborted(&self) -> bool {
        self.entries
            .iter()
            .any(|e| matches!(e, TraceEntry::LoopAborted { .. }))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fired {
    pub rule: RuleId,
    pub actions: Vec<ActionRef>,
    pub effects: Vec<StateEffect>,
}

/// Outcome of one evaluation round for a single event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dispatch {
    pub fired: Vec<Fired>,
    pub world: WorldState,
    /// Emitted events with the rule whose action emitted them.
    pub enqueued: Vec<(RuleId, EventRef)>,
}

fn intrinsic_effects<'r>(registry: &'r CapabilityRegistry, event: &EventRef) -> Result<&'r [StateEffect], ModelError> {
    registry
        .event(event)
        .map(|c| c.effects.as_slice())
        .ok_or_else(|| ModelError::Reference(event.to_string()))
}

/// Rules selected by `event` on `world`, in ascending id order.
fn select<'a>(world: &WorldState, rules: &'a [Rule], event: &EventRef) -> Result<Vec<&'a Rule>, ModelError> {
    let mut selected = Vec::new();
    for rule in rules.iter().filter(|r| r.when_part == *event) {
        let mut holds = true;
        for p in &rule.while_part {
            if !eval_predicate(world, p)? {
                holds = false;
                break;
            }
        }
        if holds {
            selected.push(rule);
        }
    }
    selected.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(selected)
}

/// One round: apply the event's intrinsic effects, select matching rules on
/// the resulting snapshot, then run them.
pub fn dispatch_event(
    registry: &CapabilityRegistry,
    world: &WorldState,
    rules: &[Rule],
    event: &EventRef,
    depth: usize,
    config: &EngineConfig,
) -> Result<Dispatch, EngineError> {
    if depth > config.max_cascade_depth {
        return Err(EngineError::DepthExceeded {
            depth,
            max: config.max_cascade_depth,
        });
    }
    let mut world = world.clone();
    world.assign_all(intrinsic_effects(registry, event)?);

    let selected = select(&world, rules, event)?;
    let mut fired = Vec::with_capacity(selected.len());
    let mut enqueued = Vec::new();
    for rule in selected {
        let mut effects = Vec::new();
        for action in &rule.do_part {
            let cap = registry
                .action(action)
                .ok_or_else(|| ModelError::Reference(action.to_string()))?;
            world.assign_all(&cap.effects);
            effects.extend(cap.effects.iter().cloned());
            enqueued.extend(cap.emits.iter().map(|e| (rule.id.clone(), e.clone())));
        }
        fired.push(Fired {
            rule: rule.id.clone(),
            actions: rule.do_part.clone(),
            effects,
        });
    }
    Ok(Dispatch { fired, world, enqueued })
}

fn check_inputs(registry: &CapabilityRegistry, rules: &[Rule], timeline: &Timeline) -> Result<(), EngineError> {
    let mut ids = HashSet::new();
    for rule in rules {
        let report = validate_rule(rule, registry);
        if !report.is_ok() {
            return Err(EngineError::Validation {
                rule: rule.id.clone(),
                violations: report.violations,
            });
        }
        if !ids.insert(&rule.id) {
            return Err(EngineError::DuplicateRuleId(rule.id.clone()));
        }
    }
    for (index, s) in timeline.stimuli().iter().enumerate() {
        match &s.payload {
            Payload::Event { event, .. } => {
                if registry.event(event).is_none() {
                    return Err(EngineError::Timeline {
                        index,
                        message: format!("`{event}` is not an event"),
                    });
                }
            }
            Payload::SetState(effect) => match registry.attribute(&effect.device, &effect.attribute) {
                None => {
                    return Err(EngineError::Timeline {
                        index,
                        message: format!("unknown attribute `{}`", effect.key()),
                    })
                }
                Some(attr) if !attr.domain.contains(&effect.value) => {
                    return Err(EngineError::Timeline {
                        index,
                        message: format!("{effect} is outside the {} domain", attr.domain.kind_name()),
                    })
                }
                Some(_) => {}
            },
        }
    }
    Ok(())
}

/// Runs `rules` over `timeline` from the registry's initial world.
pub fn run_simulation(
    registry: &CapabilityRegistry,
    rules: &[Rule],
    timeline: &Timeline,
    config: &EngineConfig,
) -> Result<EmissionTrace, EngineError> {
    run_simulation_from(registry, registry.initial_world(), rules, timeline, config)
}

/// Like [`run_simulation`], starting from `world` instead of the initial
/// world. `world` must assign every declared attribute.
pub fn run_simulation_from(
    registry: &CapabilityRegistry,
    mut world: WorldState,
    rules: &[Rule],
    timeline: &Timeline,
    config: &EngineConfig,
) -> Result<EmissionTrace, EngineError> {
    if config.max_cascade_depth == 0 {
        return Err(EngineError::InvalidConfig);
    }
    check_inputs(registry, rules, timeline)?;
    let mut entries = Vec::new();

    for stimulus in timeline.stimuli() {
        let t = stimulus.timestamp;
        world.clock = t;
        let event = match &stimulus.payload {
            Payload::SetState(effect) => {
                world.assign_all(std::iter::once(effect));
                continue;
            }
            Payload::Event { event, .. } => event,
        };

        // (event, rules that led to it)
        let mut round: Vec<(EventRef, Vec<RuleId>)> = vec![(event.clone(), Vec::new())];
        let mut depth = 0;
        while !round.is_empty() && depth <= config.max_cascade_depth {
            let mut next = Vec::new();
            for (event, chain) in round {
                let d = dispatch_event(registry, &world, rules, &event, depth, config)?;
                world = d.world;
                for f in d.fired {
                    entries.push(TraceEntry::Fire {
                        t,
                        depth,
                        rule: f.rule,
                        event: event.clone(),
                        actions: f.actions,
                        effects: f.effects,
                    });
                }
                for (rule, emitted) in d.enqueued {
                    let mut c = chain.clone();
                    c.push(rule);
                    next.push((emitted, c));
                }
            }
            round = next;
            depth += 1;
        }

        // Events past the bound still take effect; a rule they would fire
        // ends the cascade.
        for (event, mut chain) in round {
            world.assign_all(intrinsic_effects(registry, &event)?);
            if let Some(rule) = select(&world, rules, &event)?.first() {
                chain.push(rule.id.clone());
                entries.push(TraceEntry::LoopAborted {
                    t,
                    depth: config.max_cascade_depth,
                    chain,
                });
                break;
            }
        }
    }

    Ok(EmissionTrace {
        entries,
        final_world: world,
    })
}
