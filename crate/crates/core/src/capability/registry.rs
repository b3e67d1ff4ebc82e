// JSON document format for capability registries.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{
    Attribute, AttributeDomain, Capability, CapabilityKind, CapabilityRegistry, Device, EventRef,
    ModelError, StateEffect, Value, MAX_INT_DOMAIN,
};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryDoc {
    version: String,
    devices: Vec<DeviceDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceDoc {
    id: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    attributes: Attributes,
    #[serde(default)]
    capabilities: Vec<CapabilityDoc>,
}

// Keeps document order while still rejecting duplicate keys.
#[derive(Default)]
struct Attributes(Vec<(String, AttributeDoc)>);

impl Serialize for Attributes {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Attributes {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl<'de> serde::de::Visitor<'de> for Visitor {
            type Value = Attributes;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map of attribute declarations")
            }

            fn visit_map<A: serde::de::MapAccess<'de>>(self, mut access: A) -> Result<Attributes, A::Error> {
                let mut out: Vec<(String, AttributeDoc)> = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, AttributeDoc>()? {
                    if out.iter().any(|(name, _)| *name == k) {
                        return Err(serde::de::Error::custom(format!("duplicate attribute `{k}`")));
                    }
                    out.push((k, v));
                }
                Ok(Attributes(out))
            }
        }
        deserializer.deserialize_map(Visitor)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeDoc {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lo: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hi: Option<i64>,
    initial: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapabilityDoc {
    id: String,
    kind: CapabilityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    effects: Vec<EffectDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    emits: Vec<EmitDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EffectDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    device: Option<String>,
    attribute: String,
    value: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmitDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    device: Option<String>,
    capability: String,
}

/// Parses and validates a registry document.
///
/// Effects and emits may omit `device`, in which case the owning device is
/// assumed.
pub fn load_registry(source: &str) -> Result<CapabilityRegistry, ModelError> {
    let doc: RegistryDoc = serde_json::from_str(source).map_err(|e| ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut devices = Vec::with_capacity(doc.devices.len());
    let mut seen_devices = HashSet::new();
    for d in doc.devices {
        if !seen_devices.insert(d.id.clone()) {
            return Err(ModelError::Invalid(format!("duplicate device id `{}`", d.id)));
        }
        let mut attributes = Vec::with_capacity(d.attributes.0.len());
        for (name, a) in d.attributes.0 {
            let domain = parse_domain(&d.id, &name, &a)?;
            if !domain.contains(&a.initial) {
                return Err(ModelError::Domain(format!(
                    "initial value {} of {}.{} is not in its {} domain",
                    a.initial,
                    d.id,
                    name,
                    domain.kind_name()
                )));
            }
            attributes.push((
                name,
                Attribute {
                    domain,
                    initial: a.initial,
                },
            ));
        }
        let mut capabilities = Vec::with_capacity(d.capabilities.len());
        let mut seen_caps = HashSet::new();
        for c in d.capabilities {
            if !seen_caps.insert(c.id.clone()) {
                return Err(ModelError::Invalid(format!(
                    "duplicate capability id `{}.{}`",
                    d.id, c.id
                )));
            }
            capabilities.push(Capability {
                effects: c
                    .effects
                    .into_iter()
                    .map(|e| StateEffect {
                        device: e.device.unwrap_or_else(|| d.id.clone()),
                        attribute: e.attribute,
                        value: e.value,
                    })
                    .collect(),
                emits: c
                    .emits
                    .into_iter()
                    .map(|e| EventRef {
                        device: e.device.unwrap_or_else(|| d.id.clone()),
                        capability: e.capability,
                    })
                    .collect(),
                id: c.id,
                device: d.id.clone(),
                kind: c.kind,
                attribute: c.attribute,
            });
        }
        devices.push(Device {
            label: d.label.unwrap_or_else(|| d.id.clone()),
            id: d.id,
            attributes,
            capabilities,
        });
    }

    let registry = CapabilityRegistry {
        version: doc.version,
        devices,
    };
    check_references(&registry)?;
    Ok(registry)
}

fn parse_domain(device: &str, name: &str, a: &AttributeDoc) -> Result<AttributeDomain, ModelError> {
    let invalid = |msg: &str| ModelError::Invalid(format!("{device}.{name}: {msg}"));
    let symbols = |values: &Option<Vec<String>>| -> Result<Vec<String>, ModelError> {
        let values = values.clone().ok_or_else(|| invalid("missing `values`"))?;
        if values.is_empty() {
            return Err(invalid("symbol list is empty"));
        }
        let distinct: BTreeSet<&String> = values.iter().collect();
        if distinct.len() != values.len() {
            return Err(invalid("symbol list has duplicates"));
        }
        Ok(values)
    };
    let no_bounds = || {
        if a.lo.is_some() || a.hi.is_some() {
            Err(invalid("`lo`/`hi` only apply to bounded-integer"))
        } else {
            Ok(())
        }
    };
    match a.kind.as_str() {
        "boolean" => {
            no_bounds()?;
            if a.values.is_some() {
                return Err(invalid("`values` does not apply to boolean"));
            }
            Ok(AttributeDomain::Boolean)
        }
        "enumeration" => {
            no_bounds()?;
            Ok(AttributeDomain::Enumeration(symbols(&a.values)?))
        }
        "place" => {
            no_bounds()?;
            Ok(AttributeDomain::Place(symbols(&a.values)?))
        }
        "bounded-integer" => {
            if a.values.is_some() {
                return Err(invalid("`values` does not apply to bounded-integer"));
            }
            let (lo, hi) = match (a.lo, a.hi) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => return Err(invalid("bounded-integer needs `lo` and `hi`")),
            };
            if lo > hi {
                return Err(invalid("lo > hi"));
            }
            if hi.checked_sub(lo).is_none_or(|span| span >= MAX_INT_DOMAIN) {
                return Err(invalid("bounded-integer spans more than 1024 values"));
            }
            Ok(AttributeDomain::BoundedInt { lo, hi })
        }
        other => Err(invalid(&format!("unknown attribute kind `{other}`"))),
    }
}

fn check_references(registry: &CapabilityRegistry) -> Result<(), ModelError> {
    for device in &registry.devices {
        for cap in &device.capabilities {
            let name = cap.qualified();
            match cap.kind {
                CapabilityKind::State => {
                    let attr = cap.attribute.as_deref().ok_or_else(|| {
                        ModelError::Invalid(format!("state capability {name} names no attribute"))
                    })?;
                    if device.attribute(attr).is_none() {
                        return Err(ModelError::Reference(format!("{}.{attr}", device.id)));
                    }
                    if !cap.effects.is_empty() || !cap.emits.is_empty() {
                        return Err(ModelError::Invalid(format!(
                            "state capability {name} cannot declare effects or emits"
                        )));
                    }
                }
                CapabilityKind::Event => {
                    if cap.attribute.is_some() {
                        return Err(ModelError::Invalid(format!(
                            "event {name} cannot name an attribute"
                        )));
                    }
                    if !cap.emits.is_empty() {
                        return Err(ModelError::Invalid(format!("event {name} cannot emit events")));
                    }
                }
                CapabilityKind::Action => {
                    if cap.attribute.is_some() {
                        return Err(ModelError::Invalid(format!(
                            "action {name} cannot name an attribute"
                        )));
                    }
                }
            }
            for effect in &cap.effects {
                let attr = registry
                    .attribute(&effect.device, &effect.attribute)
                    .ok_or_else(|| ModelError::Reference(format!("{}.{}", effect.device, effect.attribute)))?;
                if !attr.domain.contains(&effect.value) {
                    return Err(ModelError::Domain(format!(
                        "effect {effect} of {name} is outside the {} domain",
                        attr.domain.kind_name()
                    )));
                }
            }
            for emitted in &cap.emits {
                if registry.event(emitted).is_none() {
                    return Err(ModelError::Reference(emitted.to_string()));
                }
            }
        }
    }
    Ok(())
}

fn to_doc(registry: &CapabilityRegistry) -> RegistryDoc {
    RegistryDoc {
        version: registry.version.clone(),
        devices: registry
            .devices
            .iter()
            .map(|d| DeviceDoc {
                id: d.id.clone(),
                label: Some(d.label.clone()),
                attributes: Attributes(
                    d.attributes
                        .iter()
                        .map(|(name, attr)| {
                            let (values, lo, hi) = match &attr.domain {
                                AttributeDomain::Boolean => (None, None, None),
                                AttributeDomain::Enumeration(v) | AttributeDomain::Place(v) => {
                                    (Some(v.clone()), None, None)
                                }
                                AttributeDomain::BoundedInt { lo, hi } => (None, Some(*lo), Some(*hi)),
                            };
                            (
                                name.clone(),
                                AttributeDoc {
                                    kind: attr.domain.kind_name().to_owned(),
                                    values,
                                    lo,
                                    hi,
                                    initial: attr.initial.clone(),
                                },
                            )
                        })
                        .collect(),
                ),
                capabilities: d
                    .capabilities
                    .iter()
                    .map(|c| CapabilityDoc {
                        id: c.id.clone(),
                        kind: c.kind,
                        attribute: c.attribute.clone(),
                        effects: c
                            .effects
                            .iter()
                            .map(|e| EffectDoc {
                                device: Some(e.device.clone()),
                                attribute: e.attribute.clone(),
                                value: e.value.clone(),
                            })
                            .collect(),
                        emits: c
                            .emits
                            .iter()
                            .map(|e| EmitDoc {
                                device: Some(e.device.clone()),
                                capability: e.capability.clone(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub(super) fn to_json(registry: &CapabilityRegistry) -> String {
    serde_json::to_string_pretty(&to_doc(registry)).expect("registry documents always serialize")
}

pub(super) fn to_document(registry: &CapabilityRegistry) -> serde_json::Value {
    serde_json::to_value(to_doc(registry)).expect("registry documents always serialize")
}
