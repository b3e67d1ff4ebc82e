use std::collections::BTreeMap;
use std::ops::ControlFlow;

use super::AnalyzerError;
use crate::capability::{AttrKey, CapabilityRegistry, ModelError, Value};
use crate::capability::world::compare;
use crate::diagnostic::Assignment;
use crate::rule::StatePredicate;

/// Upper bound on the number of assignments any enumeration may visit.
pub const MAX_ASSIGNMENTS: u128 = 1_000_000;

/// Product domain of a set of attributes, enumerated in odometer order
/// with the last key varying fastest.
pub(crate) struct Space {
    keys: Vec<AttrKey>,
    domains: Vec<Vec<Value>>,
}

impl Space {
    pub(crate) fn over<'p>(
        registry: &CapabilityRegistry,
        predicates: impl IntoIterator<Item = &'p StatePredicate>,
    ) -> Result<Space, AnalyzerError> {
        let mut domains = BTreeMap::new();
        for p in predicates {
            let key = p.key();
            if domains.contains_key(&key) {
                continue;
            }
            let domain = registry
                .domain(&key)
                .ok_or_else(|| ModelError::Reference(key.to_string()))?;
            domains.insert(key, domain.values());
        }
        let space = Space {
            keys: domains.keys().cloned().collect(),
            domains: domains.into_values().collect(),
        };
        let size = space.size();
        if size > MAX_ASSIGNMENTS {
            return Err(AnalyzerError::DomainTooLarge {
                size,
                limit: MAX_ASSIGNMENTS,
            });
        }
        Ok(space)
    }

    pub(crate) fn keys(&self) -> &[AttrKey] {
        &self.keys
    }

    pub(crate) fn size(&self) -> u128 {
        self.domains.iter().map(|d| d.len() as u128).product()
    }

    /// Calls `visit` on every assignment until it breaks. The empty space
    /// has exactly one (empty) assignment.
    pub(crate) fn for_each<B>(&self, mut visit: impl FnMut(&Assignment) -> ControlFlow<B>) -> Option<B> {
        if self.domains.iter().any(Vec::is_empty) {
            return None;
        }
        let mut digits = vec![0usize; self.keys.len()];
        let mut current: Assignment = self
            .keys
            .iter()
            .zip(&self.domains)
            .map(|(k, d)| (k.clone(), d[0].clone()))
            .collect();
        loop {
            if let ControlFlow::Break(b) = visit(&current) {
                return Some(b);
            }
            let mut i = self.keys.len();
            loop {
                if i == 0 {
                    return None;
                }
                i -= 1;
                digits[i] += 1;
                if digits[i] < self.domains[i].len() {
                    current.insert(self.keys[i].clone(), self.domains[i][digits[i]].clone());
                    break;
                }
                digits[i] = 0;
                current.insert(self.keys[i].clone(), self.domains[i][0].clone());
            }
        }
    }
}

/// Whether `assignment` satisfies every predicate. Attributes missing from
/// the assignment and incomparable operands count as unsatisfied.
pub(crate) fn holds(assignment: &Assignment, predicates: &[StatePredicate]) -> bool {
    predicates.iter().all(|p| {
        assignment
            .get(&p.key())
            .and_then(|v| compare(v, p.comparator, &p.literal))
            .unwrap_or(false)
    })
}

/// First assignment over the referenced attributes, in enumeration order,
/// that satisfies every predicate; `None` when the conjunction is
/// unsatisfiable.
pub fn satisfiable_conjunction(
    predicates: &[StatePredicate],
    registry: &CapabilityRegistry,
) -> Result<Option<Assignment>, AnalyzerError> {
    let space = Space::over(registry, predicates)?;
    Ok(space.for_each(|a| {
        if holds(a, predicates) {
            ControlFlow::Break(a.clone())
        } else {
            ControlFlow::Continue(())
        }
    }))
}
