use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CapabilityRegistry, ModelError, StateEffect, Value};
use crate::rule::{Comparator, StatePredicate};

/// `(device, attribute)` address of one piece of world state.
///
/// Serializes as the dotted string `device.attribute`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttrKey {
    pub device: String,
    pub attribute: String,
}

impl AttrKey {
    pub fn new(device: &str, attribute: &str) -> Self {
        AttrKey {
            device: device.to_owned(),
            attribute: attribute.to_owned(),
        }
    }
}

impl fmt::Display for AttrKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.device, self.attribute)
    }
}

impl FromStr for AttrKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((d, a)) if !d.is_empty() && !a.is_empty() && !a.contains('.') => {
                Ok(AttrKey::new(d, a))
            }
            _ => Err(format!("expected `device.attribute`, got `{s}`")),
        }
    }
}

impl Serialize for AttrKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AttrKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Snapshot of every declared attribute at one instant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldState {
    pub clock: i64,
    pub assignments: BTreeMap<AttrKey, Value>,
}

impl WorldState {
    pub fn new(assignments: BTreeMap<AttrKey, Value>) -> Self {
        WorldState {
            clock: 0,
            assignments,
        }
    }

    pub fn get(&self, key: &AttrKey) -> Option<&Value> {
        self.assignments.get(key)
    }

    pub fn value(&self, device: &str, attribute: &str) -> Option<&Value> {
        self.assignments.get(&AttrKey::new(device, attribute))
    }

    /// Overwrites the listed attributes in place; callers have already
    /// checked the values against their domains.
    pub(crate) fn assign_all<'a>(&mut self, effects: impl IntoIterator<Item = &'a StateEffect>) {
        for e in effects {
            self.assignments.insert(e.key(), e.value.clone());
        }
    }
}

/// Returns a new snapshot with `effects` applied in order, the last write to
/// an attribute winning. The input is left untouched.
pub fn apply_effects(
    registry: &CapabilityRegistry,
    world: &WorldState,
    effects: &[StateEffect],
) -> Result<WorldState, ModelError> {
    for e in effects {
        let attr = registry
            .attribute(&e.device, &e.attribute)
            .ok_or_else(|| ModelError::Reference(e.key().to_string()))?;
        if !attr.domain.contains(&e.value) {
            return Err(ModelError::Domain(format!(
                "{e} is outside the {} domain",
                attr.domain.kind_name()
            )));
        }
    }
    let mut next = world.clone();
    next.assign_all(effects);
    Ok(next)
}

/// Evaluates one state predicate against a snapshot.
///
/// Ordering comparators require integer operands on both sides; anything
/// else is [`ModelError::IncomparableDomain`].
pub fn eval_predicate(world: &WorldState, predicate: &StatePredicate) -> Result<bool, ModelError> {
    let key = predicate.key();
    let stored = world
        .get(&key)
        .ok_or_else(|| ModelError::Reference(key.to_string()))?;
    compare(stored, predicate.comparator, &predicate.literal).ok_or_else(|| {
        ModelError::IncomparableDomain {
            target: key.to_string(),
            comparator: predicate.comparator.to_string(),
        }
    })
}

/// `None` when the comparator does not apply to these operands.
pub(crate) fn compare(stored: &Value, cmp: Comparator, literal: &Value) -> Option<bool> {
    match (stored, literal) {
        (Value::Int(a), Value::Int(b)) => Some(match cmp {
            Comparator::Eq => a == b,
            Comparator::Ne => a != b,
            Comparator::Lt => a < b,
            Comparator::Gt => a > b,
            Comparator::Le => a <= b,
            Comparator::Ge => a >= b,
        }),
        (Value::Bool(_), Value::Bool(_)) | (Value::Symbol(_), Value::Symbol(_)) => match cmp {
            Comparator::Eq => Some(stored == literal),
            Comparator::Ne => Some(stored != literal),
            _ => None,
        },
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn pred(device: &str, attribute: &str, cmp: Comparator, v: impl Into<Value>) -> StatePredicate {
        StatePredicate::new(device, attribute, cmp, v)
    }

    fn place_registry() -> CapabilityRegistry {
        super::super::load_registry(
            r#"{"version": "t", "devices": [{"id": "user", "attributes": {
                "location": {"kind": "place", "values": ["home", "away", "office"], "initial": "home"}}}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn closing_an_open_window() {
        let reg = fixtures::smart_home();
        let mut world = reg.initial_world();
        world.assign_all(&[StateEffect::new("window_1", "open", true)]);
        let next = apply_effects(&reg, &world, &[StateEffect::new("window_1", "open", true)]).unwrap();
        assert_eq!(next.value("window_1", "open"), Some(&Value::Bool(true)));
        let closed = apply_effects(&reg, &world, &[StateEffect::new("window_1", "open", false)]).unwrap();
        assert_eq!(closed.value("window_1", "open"), Some(&Value::Bool(false)));
        // input unchanged
        assert_eq!(world.value("window_1", "open"), Some(&Value::Bool(true)));
    }

    #[test]
    fn empty_effect_list_is_identity() {
        let reg = fixtures::smart_home();
        let world = reg.initial_world();
        assert_eq!(apply_effects(&reg, &world, &[]).unwrap(), world);
    }

    #[test]
    fn last_writer_wins() {
        let reg = fixtures::smart_home();
        let world = reg.initial_world();
        let next = apply_effects(
            &reg,
            &world,
            &[
                StateEffect::new("alarm", "armed", true),
                StateEffect::new("alarm", "armed", false),
            ],
        )
        .unwrap();
        assert_eq!(next.value("alarm", "armed"), Some(&Value::Bool(false)));
    }

    #[test]
    fn out_of_domain_effect_is_rejected() {
        let reg = fixtures::smart_home();
        let world = reg.initial_world();
        let err = apply_effects(&reg, &world, &[StateEffect::new("user", "location", "mars")]).unwrap_err();
        assert!(matches!(err, ModelError::Domain(_)));
        let err = apply_effects(&reg, &world, &[StateEffect::new("window_1", "color", "red")]).unwrap_err();
        assert!(matches!(err, ModelError::Reference(_)));
    }

    #[test]
    fn not_at_home() {
        let reg = place_registry();
        let mut world = reg.initial_world();
        world.assign_all(&[StateEffect::new("user", "location", "away")]);
        assert!(eval_predicate(&world, &pred("user", "location", Comparator::Ne, "home")).unwrap());
        assert!(!eval_predicate(&world, &pred("user", "location", Comparator::Eq, "home")).unwrap());
    }

    #[test]
    fn alarm_on() {
        let reg = fixtures::smart_home();
        let mut world = reg.initial_world();
        world.assign_all(&[StateEffect::new("alarm", "armed", true)]);
        assert!(eval_predicate(&world, &pred("alarm", "armed", Comparator::Eq, true)).unwrap());
    }

    #[test]
    fn ordering_a_boolean_is_incomparable() {
        let reg = fixtures::smart_home();
        let world = reg.initial_world();
        let err = eval_predicate(&world, &pred("alarm", "armed", Comparator::Lt, true)).unwrap_err();
        assert!(matches!(err, ModelError::IncomparableDomain { .. }));
        let err = eval_predicate(&world, &pred("alarm", "missing", Comparator::Eq, true)).unwrap_err();
        assert!(matches!(err, ModelError::Reference(_)));
    }

    #[test]
    fn integer_ordering() {
        let w = WorldState::new([(AttrKey::new("t", "n"), Value::Int(3))].into_iter().collect());
        let cases = [
            (Comparator::Lt, 4, true),
            (Comparator::Lt, 3, false),
            (Comparator::Le, 3, true),
            (Comparator::Gt, 2, true),
            (Comparator::Ge, 4, false),
            (Comparator::Ne, 3, false),
        ];
        for (cmp, lit, expected) in cases {
            assert_eq!(eval_predicate(&w, &pred("t", "n", cmp, lit)).unwrap(), expected, "{cmp} {lit}");
        }
    }

    #[test]
    fn attr_key_parsing() {
        assert_eq!("a.b".parse::<AttrKey>().unwrap(), AttrKey::new("a", "b"));
        assert!("ab".parse::<AttrKey>().is_err());
        assert!("a.b.c".parse::<AttrKey>().is_err());
    }

    fn effect_strategy() -> impl Strategy<Value = StateEffect> {
        prop_oneof![
            any::<bool>().prop_map(|b| StateEffect::new("window_1", "open", b)),
            any::<bool>().prop_map(|b| StateEffect::new("alarm", "armed", b)),
            prop::sample::select(vec!["home_street", "away", "office"])
                .prop_map(|p| StateEffect::new("user", "location", p)),
        ]
    }

    proptest! {
        #[test]
        fn effects_compose_over_concatenation(
            a in prop::collection::vec(effect_strategy(), 0..6),
            b in prop::collection::vec(effect_strategy(), 0..6),
        ) {
            let reg = fixtures::smart_home();
            let w = reg.initial_world();
            let stepwise = apply_effects(&reg, &apply_effects(&reg, &w, &a).unwrap(), &b).unwrap();
            let joined: Vec<_> = a.iter().chain(b.iter()).cloned().collect();
            prop_assert_eq!(stepwise, apply_effects(&reg, &w, &joined).unwrap());
        }
    }
}
