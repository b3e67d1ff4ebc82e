//! Devices, typed attributes and the event/state/action capability algebra.
//!
//! A [`CapabilityRegistry`] is the ground truth every other module consults:
//! the DSL resolves names against it, the engine reads intrinsic effects and
//! emitted events from it, and the analyzer enumerates its attribute domains.

mod registry;
pub(crate) mod world;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use registry::load_registry;
pub use world::{apply_effects, eval_predicate, AttrKey, WorldState};

/// Largest span a bounded-integer attribute may cover.
pub const MAX_INT_DOMAIN: i64 = 1024;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unresolved reference: {0}")]
    Reference(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("comparator `{comparator}` cannot be applied to {target}")]
    IncomparableDomain { target: String, comparator: String },
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("invalid registry: {0}")]
    Invalid(String),
}

/// A typed attribute value.
///
/// Enumeration and place members are both carried as symbols; the owning
/// attribute's domain decides which symbols are legal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Symbol(String),
}

impl Value {
    pub fn symbol(s: impl Into<String>) -> Self {
        Value::Symbol(s.into())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Symbol(s) => f.write_str(s),
        }
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Symbol(s.to_owned())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttributeDomain {
    Boolean,
    Enumeration(Vec<String>),
    BoundedInt { lo: i64, hi: i64 },
    Place(Vec<String>),
}

impl AttributeDomain {
    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (AttributeDomain::Boolean, Value::Bool(_)) => true,
            (AttributeDomain::BoundedInt { lo, hi }, Value::Int(i)) => lo <= i && i <= hi,
            (AttributeDomain::Enumeration(symbols), Value::Symbol(s))
            | (AttributeDomain::Place(symbols), Value::Symbol(s)) => symbols.contains(s),
            _ => false,
        }
    }

    /// Every member of the domain, in declaration order (`false` before `true`).
    pub fn values(&self) -> Vec<Value> {
        match self {
            AttributeDomain::Boolean => vec![Value::Bool(false), Value::Bool(true)],
            AttributeDomain::BoundedInt { lo, hi } => (*lo..=*hi).map(Value::Int).collect(),
            AttributeDomain::Enumeration(symbols) | AttributeDomain::Place(symbols) => {
                symbols.iter().cloned().map(Value::Symbol).collect()
            }
        }
    }

    pub fn size(&self) -> u64 {
        match self {
            AttributeDomain::Boolean => 2,
            AttributeDomain::BoundedInt { lo, hi } => (hi - lo + 1) as u64,
            AttributeDomain::Enumeration(symbols) | AttributeDomain::Place(symbols) => {
                symbols.len() as u64
            }
        }
    }

    /// Only bounded integers admit `<`, `>`, `<=` and `>=`.
    pub fn is_ordered(&self) -> bool {
        matches!(self, AttributeDomain::BoundedInt { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AttributeDomain::Boolean => "boolean",
            AttributeDomain::Enumeration(_) => "enumeration",
            AttributeDomain::BoundedInt { .. } => "bounded-integer",
            AttributeDomain::Place(_) => "place",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attribute {
    pub domain: AttributeDomain,
    pub initial: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapabilityKind {
    Event,
    State,
    Action,
}

impl fmt::Display for CapabilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CapabilityKind::Event => "event",
            CapabilityKind::State => "state",
            CapabilityKind::Action => "action",
        })
    }
}

/// One of the three parts of a rule being filled in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Slot {
    Do,
    When,
    While,
}

impl Slot {
    pub fn kind(self) -> CapabilityKind {
        match self {
            Slot::Do => CapabilityKind::Action,
            Slot::When => CapabilityKind::Event,
            Slot::While => CapabilityKind::State,
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slot::Do => "DO",
            Slot::When => "WHEN",
            Slot::While => "WHILE",
        })
    }
}

impl std::str::FromStr for Slot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "do" => Ok(Slot::Do),
            "when" => Ok(Slot::When),
            "while" => Ok(Slot::While),
            other => Err(format!("unknown slot `{other}`")),
        }
    }
}

/// Assignment of a value to one device attribute.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEffect {
    pub device: String,
    pub attribute: String,
    pub value: Value,
}

impl StateEffect {
    pub fn new(device: &str, attribute: &str, value: impl Into<Value>) -> Self {
        StateEffect {
            device: device.to_owned(),
            attribute: attribute.to_owned(),
            value: value.into(),
        }
    }

    pub fn key(&self) -> AttrKey {
        AttrKey::new(&self.device, &self.attribute)
    }
}

impl fmt::Display for StateEffect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}:={}", self.device, self.attribute, self.value)
    }
}

/// Qualified `device.capability` reference to an event.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRef {
    pub device: String,
    pub capability: String,
}

/// Qualified `device.capability` reference to an action.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRef {
    pub device: String,
    pub capability: String,
}

macro_rules! qualified_ref {
    ($name:ident) => {
        impl $name {
            pub fn new(device: &str, capability: &str) -> Self {
                $name {
                    device: device.to_owned(),
                    capability: capability.to_owned(),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}.{}", self.device, self.capability)
            }
        }
    };
}

qualified_ref!(EventRef);
qualified_ref!(ActionRef);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Capability {
    pub id: String,
    pub device: String,
    pub kind: CapabilityKind,
    /// The attribute a state capability observes; `None` for events and actions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub effects: Vec<StateEffect>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub emits: Vec<EventRef>,
}

impl Capability {
    pub fn qualified(&self) -> String {
        format!("{}.{}", self.device, self.id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Device {
    pub id: String,
    pub label: String,
    /// Declaration order is kept so serialization round-trips cleanly.
    pub attributes: Vec<(String, Attribute)>,
    pub capabilities: Vec<Capability>,
}

impl Device {
    pub fn attribute(&self, id: &str) -> Option<&Attribute> {
        self.attributes
            .iter()
            .find(|(name, _)| name == id)
            .map(|(_, attr)| attr)
    }

    pub fn capability(&self, id: &str) -> Option<&Capability> {
        self.capabilities.iter().find(|c| c.id == id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapabilityRegistry {
    pub version: String,
    pub devices: Vec<Device>,
}

impl CapabilityRegistry {
    pub fn device(&self, id: &str) -> Option<&Device> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub fn capability(&self, device: &str, id: &str) -> Option<&Capability> {
        self.device(device)?.capability(id)
    }

    pub fn attribute(&self, device: &str, attribute: &str) -> Option<&Attribute> {
        self.device(device)?.attribute(attribute)
    }

    pub fn domain(&self, key: &AttrKey) -> Option<&AttributeDomain> {
        self.attribute(&key.device, &key.attribute)
            .map(|attr| &attr.domain)
    }

    /// Looks up `event` and checks that it is an event capability.
    pub fn event(&self, event: &EventRef) -> Option<&Capability> {
        self.capability(&event.device, &event.capability)
            .filter(|c| c.kind == CapabilityKind::Event)
    }

    pub fn action(&self, action: &ActionRef) -> Option<&Capability> {
        self.capability(&action.device, &action.capability)
            .filter(|c| c.kind == CapabilityKind::Action)
    }

    pub fn capabilities(&self) -> impl Iterator<Item = &Capability> {
        self.devices.iter().flat_map(|d| d.capabilities.iter())
    }

    /// All declared attributes in registry order.
    pub fn attribute_keys(&self) -> impl Iterator<Item = (AttrKey, &Attribute)> {
        self.devices.iter().flat_map(|d| {
            d.attributes
                .iter()
                .map(move |(name, attr)| (AttrKey::new(&d.id, name), attr))
        })
    }

    /// The world before any stimulus: every attribute at its initial value.
    pub fn initial_world(&self) -> WorldState {
        WorldState::new(
            self.attribute_keys()
                .map(|(key, attr)| (key, attr.initial.clone()))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        registry::to_json(self)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        registry::to_document(self)
    }
}

/// Capabilities legal for `slot`, optionally restricted to one device, in
/// registry order.
pub fn filter_capabilities<'r>(
    registry: &'r CapabilityRegistry,
    slot: Slot,
    device: Option<&str>,
) -> Result<Vec<&'r Capability>, ModelError> {
    if let Some(id) = device {
        if registry.device(id).is_none() {
            return Err(ModelError::UnknownDevice(id.to_owned()));
        }
    }
    let kind = slot.kind();
    Ok(registry
        .capabilities()
        .filter(|c| c.kind == kind)
        .filter(|c| device.is_none_or(|d| c.device == d))
        .collect())
}
