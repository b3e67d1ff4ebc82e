//! Success / partial / failure grading of candidate rule sets against a
//! reference task.
//!
//! Each reference rule is classified against every candidate:
//!
//! * `Exact`: canonical forms agree (DO compared as a multiset unless the
//!   reference asks for ordered comparison);
//! * `Partial`: same WHEN, the candidate's WHILE and DO contain the
//!   reference's, and the candidate adds extra actions or predicates;
//! * `Miss`: anything else, including a candidate that drops a required
//!   element.
//!
//! The task is `S` when the candidates and references pair up one-to-one on
//! exact matches, `F` when no reference has an exact or partial match, and
//! `P` otherwise.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::capability::{ActionRef, CapabilityRegistry};
use crate::rule::{canonicalize, validate_rule, Rule, RuleId, Violation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GradeLabel {
    S,
    P,
    F,
}

impl GradeLabel {
    pub fn score(self) -> u8 {
        match self {
            GradeLabel::S => 2,
            GradeLabel::P => 1,
            GradeLabel::F => 0,
        }
    }
}

impl fmt::Display for GradeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl std::str::FromStr for GradeLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S" => Ok(GradeLabel::S),
            "P" => Ok(GradeLabel::P),
            "F" => Ok(GradeLabel::F),
            other => Err(format!("unknown grade `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceTask {
    pub id: String,
    pub description: String,
    pub reference_rules: Vec<Rule>,
    /// Parallel to `reference_rules`.
    pub ordered_do: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchClass {
    Miss,
    Partial,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceMatch {
    pub reference: RuleId,
    pub class: MatchClass,
    /// Candidates achieving `class`; empty on a miss.
    pub candidates: Vec<RuleId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeReport {
    pub task: String,
    pub label: GradeLabel,
    pub score: u8,
    pub matches: Vec<ReferenceMatch>,
    /// Candidates that neither exactly nor partially match any reference.
    pub unmatched: Vec<RuleId>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum GradeError {
    #[error("candidate {rule} is invalid: {}", .violations.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    InvalidCandidate { rule: RuleId, violations: Vec<Violation> },
}

fn multiset(actions: &[ActionRef]) -> BTreeMap<&ActionRef, usize> {
    let mut counts = BTreeMap::new();
    for a in actions {
        *counts.entry(a).or_insert(0) += 1;
    }
    counts
}

fn contains_multiset(outer: &[ActionRef], inner: &[ActionRef]) -> bool {
    let outer = multiset(outer);
    multiset(inner)
        .into_iter()
        .all(|(a, n)| outer.get(a).copied().unwrap_or(0) >= n)
}

/// Classifies one canonical candidate against one canonical reference.
pub fn classify(candidate: &Rule, reference: &Rule, ordered_do: bool) -> MatchClass {
    if candidate.when_part != reference.when_part {
        return MatchClass::Miss;
    }
    let same_do = if ordered_do {
        candidate.do_part == reference.do_part
    } else {
        multiset(&candidate.do_part) == multiset(&reference.do_part)
    };
    if same_do && candidate.while_part == reference.while_part {
        return MatchClass::Exact;
    }
    let while_contained = reference
        .while_part
        .iter()
        .all(|p| candidate.while_part.contains(p));
    let do_contained = contains_multiset(&candidate.do_part, &reference.do_part);
    let extras = candidate.do_part.len() > reference.do_part.len()
        || candidate.while_part.len() > reference.while_part.len();
    if while_contained && do_contained && extras {
        MatchClass::Partial
    } else {
        MatchClass::Miss
    }
}

// Kuhn's augmenting-path matching over the exact-match edges.
fn perfect_exact_matching(edges: &[Vec<usize>], candidates: usize) -> bool {
    fn augment(r: usize, edges: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &c in &edges[r] {
            if seen[c] {
                continue;
            }
            seen[c] = true;
            if owner[c].is_none_or(|other| augment(other, edges, seen, owner)) {
                owner[c] = Some(r);
                return true;
            }
        }
        false
    }
    if edges.len() != candidates {
        return false;
    }
    let mut owner = vec![None; candidates];
    (0..edges.len()).all(|r| {
        let mut seen = vec![false; candidates];
        augment(r, edges, &mut seen, &mut owner)
    })
}

/// Grades `candidates` against `task`. Candidates must validate against
/// `registry`.
pub fn grade(
    candidates: &[Rule],
    task: &ReferenceTask,
    registry: &CapabilityRegistry,
) -> Result<GradeReport, GradeError> {
    for c in candidates {
        let report = validate_rule(c, registry);
        if !report.is_ok() {
            return Err(GradeError::InvalidCandidate {
                rule: c.id.clone(),
                violations: report.violations,
            });
        }
    }
    let canon_candidates: Vec<Rule> = candidates.iter().map(canonicalize).collect();
    let mut used = vec![false; candidates.len()];
    let mut exact_edges = Vec::with_capacity(task.reference_rules.len());
    let mut matches = Vec::with_capacity(task.reference_rules.len());

    for (i, reference) in task.reference_rules.iter().enumerate() {
        let ordered = task.ordered_do.get(i).copied().unwrap_or(false);
        let reference_canon = canonicalize(reference);
        let classes: Vec<MatchClass> = canon_candidates
            .iter()
            .map(|c| classify(c, &reference_canon, ordered))
            .collect();
        let best = classes.iter().copied().max().unwrap_or(MatchClass::Miss);
        let mut best_ids: Vec<RuleId> = Vec::new();
        if best != MatchClass::Miss {
            for (j, class) in classes.iter().enumerate() {
                if *class == best {
                    best_ids.push(candidates[j].id.clone());
                }
            }
        }
        best_ids.sort();
        for (j, class) in classes.iter().enumerate() {
            if *class != MatchClass::Miss {
                used[j] = true;
            }
        }
        exact_edges.push(
            classes
                .iter()
                .enumerate()
                .filter(|(_, c)| **c == MatchClass::Exact)
                .map(|(j, _)| j)
                .collect::<Vec<_>>(),
        );
        matches.push(ReferenceMatch {
            reference: reference.id.clone(),
            class: best,
            candidates: best_ids,
        });
    }

    let mut unmatched: Vec<RuleId> = candidates
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(c, _)| c.id.clone())
        .collect();
    unmatched.sort();

    let label = if perfect_exact_matching(&exact_edges, candidates.len()) {
        GradeLabel::S
    } else if matches.iter().all(|m| m.class == MatchClass::Miss) {
        GradeLabel::F
    } else {
        GradeLabel::P
    };
    Ok(GradeReport {
        task: task.id.clone(),
        label,
        score: label.score(),
        matches,
        unmatched,
    })
}
