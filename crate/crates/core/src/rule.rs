//! Canonical event-state rules and their validation against a registry.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::capability::{ActionRef, AttrKey, CapabilityKind, CapabilityRegistry, EventRef, Slot, Value};

/// Rule identifier. Orders naturally, so `r2` sorts before `r10`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleId(pub String);

impl RuleId {
    pub fn new(id: impl Into<String>) -> Self {
        RuleId(id.into())
    }

    /// The id assigned to the `n`-th rule (1-based) of a file or store.
    pub fn positional(n: usize) -> Self {
        RuleId(format!("r{n}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn split(&self) -> (&str, Option<u64>) {
        let digits = self.0.len() - self.0.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (prefix, suffix) = self.0.split_at(self.0.len() - digits);
        (prefix, suffix.parse().ok())
    }
}

impl Ord for RuleId {
    fn cmp(&self, other: &Self) -> Ordering {
        let (pa, na) = self.split();
        let (pb, nb) = other.split();
        pa.cmp(pb)
            .then_with(|| na.cmp(&nb))
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for RuleId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RuleId {
    fn from(s: &str) -> Self {
        RuleId(s.to_owned())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

impl Comparator {
    pub const ALL: [Comparator; 6] = [
        Comparator::Eq,
        Comparator::Ne,
        Comparator::Lt,
        Comparator::Gt,
        Comparator::Le,
        Comparator::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Gt => ">",
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, Comparator::Eq | Comparator::Ne)
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// One conjunct of a WHILE part: `device.attribute <cmp> literal`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatePredicate {
    pub device: String,
    pub attribute: String,
    #[serde(rename = "cmp")]
    pub comparator: Comparator,
    #[serde(rename = "value")]
    pub literal: Value,
}

impl StatePredicate {
    pub fn new(device: &str, attribute: &str, comparator: Comparator, literal: impl Into<Value>) -> Self {
        StatePredicate {
            device: device.to_owned(),
            attribute: attribute.to_owned(),
            comparator,
            literal: literal.into(),
        }
    }

    pub fn key(&self) -> AttrKey {
        AttrKey::new(&self.device, &self.attribute)
    }
}

impl fmt::Display for StatePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{} {} {}", self.device, self.attribute, self.comparator, self.literal)
    }
}

/// `DO <actions> WHEN <event> WHILE <predicates>`.
///
/// The WHEN part is a single field, so a rule with zero or several triggering
/// events cannot be represented.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub id: RuleId,
    #[serde(rename = "do")]
    pub do_part: Vec<ActionRef>,
    #[serde(rename = "when")]
    pub when_part: EventRef,
    #[serde(rename = "while", default)]
    pub while_part: Vec<StatePredicate>,
}

impl Rule {
    pub fn new(id: impl Into<String>, do_part: Vec<ActionRef>, when_part: EventRef, while_part: Vec<StatePredicate>) -> Self {
        Rule {
            id: RuleId::new(id),
            do_part,
            when_part,
            while_part,
        }
    }

    pub fn with_id(mut self, id: RuleId) -> Self {
        self.id = id;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyDo,
    UnknownDevice,
    UnknownCapability,
    UnknownAttribute,
    KindMismatch,
    Incomparable,
    OutOfDomain,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub part: Slot,
    pub index: usize,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_ref(
    registry: &CapabilityRegistry,
    part: Slot,
    index: usize,
    device: &str,
    capability: &str,
    out: &mut Vec<Violation>,
) {
    let expected = part.kind();
    let Some(dev) = registry.device(device) else {
        out.push(Violation {
            part,
            index,
            kind: ViolationKind::UnknownDevice,
            message: format!("unknown device `{device}`"),
        });
        return;
    };
    match dev.capability(capability) {
        None => out.push(Violation {
            part,
            index,
            kind: ViolationKind::UnknownCapability,
            message: format!("`{device}` has no capability `{capability}`"),
        }),
        Some(cap) if cap.kind != expected => out.push(Violation {
            part,
            index,
            kind: ViolationKind::KindMismatch,
            message: format!("{part} needs an {expected}, but `{device}.{capability}` is a {}", cap.kind),
        }),
        Some(_) => {}
    }
}

/// Checks every reference, comparator and literal of `rule`. Problems are
/// reported as data, tagged with the rule part and position they came from.
pub fn validate_rule(rule: &Rule, registry: &CapabilityRegistry) -> ValidationReport {
    let mut violations = Vec::new();
    if rule.do_part.is_empty() {
        violations.push(Violation {
            part: Slot::Do,
            index: 0,
            kind: ViolationKind::EmptyDo,
            message: "DO needs at least one action".into(),
        });
    }
    for (i, action) in rule.do_part.iter().enumerate() {
        check_ref(registry, Slot::Do, i, &action.device, &action.capability, &mut violations);
    }
    check_ref(
        registry,
        Slot::When,
        0,
        &rule.when_part.device,
        &rule.when_part.capability,
        &mut violations,
    );
    for (i, p) in rule.while_part.iter().enumerate() {
        let violation = |kind, message| Violation {
            part: Slot::While,
            index: i,
            kind,
            message,
        };
        let Some(dev) = registry.device(&p.device) else {
            violations.push(violation(ViolationKind::UnknownDevice, format!("unknown device `{}`", p.device)));
            continue;
        };
        let Some(attr) = dev.attribute(&p.attribute) else {
            // A predicate naming an event or action of the device is the
            // WHILE-side version of the kind confusion.
            let (kind, message) = match dev.capability(&p.attribute) {
                Some(cap) if cap.kind != CapabilityKind::State => (
                    ViolationKind::KindMismatch,
                    format!("WHILE needs a state, but `{}.{}` is an {}", p.device, p.attribute, cap.kind),
                ),
                _ => (
                    ViolationKind::UnknownAttribute,
                    format!("`{}` has no attribute `{}`", p.device, p.attribute),
                ),
            };
            violations.push(violation(kind, message));
            continue;
        };
        if p.comparator.is_ordering() && !attr.domain.is_ordered() {
            violations.push(violation(
                ViolationKind::Incomparable,
                format!("`{}` cannot compare a {} attribute", p.comparator, attr.domain.kind_name()),
            ));
        }
        if !attr.domain.contains(&p.literal) {
            violations.push(violation(
                ViolationKind::OutOfDomain,
                format!("{} is not a legal value of {}.{}", p.literal, p.device, p.attribute),
            ));
        }
    }
    ValidationReport { violations }
}

/// Sorts the WHILE part and drops exact duplicates; DO order is kept.
pub fn canonicalize(rule: &Rule) -> Rule {
    let mut out = rule.clone();
    out.while_part.sort();
    out.while_part.dedup();
    out
}
