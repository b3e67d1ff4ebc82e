//! File-backed rule store. Every mutation rewrites `rules.json` through a
//! temporary file and a rename, so readers only ever see a whole document.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sensation_core::capability::CapabilityRegistry;
use sensation_core::rule::{canonicalize, validate_rule, Rule, RuleId, Violation};

pub const STORE_FILE: &str = "rules.json";
const TEMP_FILE: &str = "rules.json.tmp";

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("no rule `{0}`")]
    NotFound(RuleId),
    #[error("stale revision {given}; the store is at revision {current}")]
    Stale { given: u64, current: u64 },
    #[error("rule {rule} is invalid: {}", .violations.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid { rule: RuleId, violations: Vec<Violation> },
    #[error("store I/O failed: {0}")]
    Io(String),
    #[error("{STORE_FILE} is corrupt: {0}")]
    Corrupt(String),
    #[error("simulated crash at {0:?}")]
    Crashed(FaultPoint),
}

fn io(e: std::io::Error) -> StoreError {
    StoreError::Io(e.to_string())
}

/// Places in a write where a crash can be simulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultPoint {
    /// The temporary file is written but not yet synced.
    AfterTempWrite,
    /// The temporary file is synced; the rename has not happened.
    BeforeRename,
    /// The rename is done; the directory is not yet synced.
    AfterRename,
}

impl FaultPoint {
    pub const ALL: [FaultPoint; 3] = [FaultPoint::AfterTempWrite, FaultPoint::BeforeRename, FaultPoint::AfterRename];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "after-temp-write" => Some(FaultPoint::AfterTempWrite),
            "before-rename" => Some(FaultPoint::BeforeRename),
            "after-rename" => Some(FaultPoint::AfterRename),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Abandon the write and return [`StoreError::Crashed`].
    Fail(FaultPoint),
    /// Kill the process on the spot.
    Abort(FaultPoint),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreDocument {
    pub revision: u64,
    pub next_id: u64,
    pub rules: Vec<Rule>,
}

impl StoreDocument {
    fn empty() -> Self {
        StoreDocument {
            revision: 0,
            next_id: 1,
            rules: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let doc: StoreDocument = serde_json::from_str(text).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        if doc.rules.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(StoreError::Corrupt("rules are not in strictly ascending id order".into()));
        }
        Ok(doc)
    }
}

#[derive(Debug)]
pub struct RuleStore {
    dir: PathBuf,
    doc: StoreDocument,
    fault: Option<Fault>,
}

impl RuleStore {
    /// Opens the store in `dir`, creating the directory if needed. A
    /// temporary file left by an interrupted write is discarded.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(io)?;
        let temp = dir.join(TEMP_FILE);
        if temp.exists() {
            fs::remove_file(&temp).map_err(io)?;
        }
        let path = dir.join(STORE_FILE);
        let doc = match fs::read_to_string(&path) {
            Ok(text) => StoreDocument::parse(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoreDocument::empty(),
            Err(e) => return Err(io(e)),
        };
        Ok(RuleStore {
            dir: dir.to_owned(),
            doc,
            fault: None,
        })
    }

    pub fn path(&self) -> PathBuf {
        self.dir.join(STORE_FILE)
    }

    pub fn revision(&self) -> u64 {
        self.doc.revision
    }

    pub fn rules(&self) -> &[Rule] {
        &self.doc.rules
    }

    pub fn get(&self, id: &RuleId) -> Option<&Rule> {
        self.doc.rules.iter().find(|r| &r.id == id)
    }

    pub fn set_fault(&mut self, fault: Option<Fault>) {
        self.fault = fault;
    }

    fn check_revision(&self, given: Option<u64>) -> Result<(), StoreError> {
        match given {
            Some(given) if given != self.doc.revision => Err(StoreError::Stale {
                given,
                current: self.doc.revision,
            }),
            _ => Ok(()),
        }
    }

    fn checked(rule: &Rule, registry: &CapabilityRegistry) -> Result<Rule, StoreError> {
        let report = validate_rule(rule, registry);
        if !report.is_ok() {
            return Err(StoreError::Invalid {
                rule: rule.id.clone(),
                violations: report.violations,
            });
        }
        Ok(canonicalize(rule))
    }

    /// Stores `rule` under the next free id `r<N>`; any id it carries is
    /// ignored.
    pub fn add(&mut self, rule: &Rule, registry: &CapabilityRegistry) -> Result<Rule, StoreError> {
        let id = RuleId::new(format!("r{}", self.doc.next_id));
        let rule = Self::checked(&rule.clone().with_id(id), registry)?;
        let mut next = self.doc.clone();
        next.next_id += 1;
        next.rules.push(rule.clone());
        next.rules.sort_by(|a, b| a.id.cmp(&b.id));
        self.commit(next)?;
        Ok(rule)
    }

    pub fn replace(
        &mut self,
        id: &RuleId,
        rule: &Rule,
        revision: Option<u64>,
        registry: &CapabilityRegistry,
    ) -> Result<Rule, StoreError> {
        self.check_revision(revision)?;
        let pos = self
            .doc
            .rules
            .iter()
            .position(|r| &r.id == id)
            .ok_or_else(|| StoreError::NotFound(id.clone()))?;
        let rule = Self::checked(&rule.clone().with_id(id.clone()), registry)?;
        let mut next = self.doc.clone();
        next.rules[pos] = rule.clone();
        self.commit(next)?;
        Ok(rule)
    }

    pub fn delete(&mut self, id: &RuleId, revision: Option<u64>) -> Result<Rule, StoreError> {
        self.check_revision(revision)?;
        let pos = self
            .doc
            .rules
            .iter()
            .position(|r| &r.id == id)
            .ok_or_else(|| StoreError::NotFound(id.clone()))?;
        let mut next = self.doc.clone();
        let removed = next.rules.remove(pos);
        self.commit(next)?;
        Ok(removed)
    }

    fn fault_at(&self, point: FaultPoint) -> Result<(), StoreError> {
        match self.fault {
            Some(Fault::Fail(p)) if p == point => Err(StoreError::Crashed(point)),
            Some(Fault::Abort(p)) if p == point => std::process::abort(),
            _ => Ok(()),
        }
    }

    /// Persists `next` with a bumped revision, then adopts it in memory.
    /// On any failure the in-memory state is unchanged.
    fn commit(&mut self, mut next: StoreDocument) -> Result<(), StoreError> {
        next.revision = self.doc.revision + 1;
        let text = serde_json::to_string_pretty(&next).expect("store documents serialize") + "\n";
        let temp = self.dir.join(TEMP_FILE);
        let mut file = File::create(&temp).map_err(io)?;
        file.write_all(text.as_bytes()).map_err(io)?;
        self.fault_at(FaultPoint::AfterTempWrite)?;
        file.sync_all().map_err(io)?;
        drop(file);
        self.fault_at(FaultPoint::BeforeRename)?;
        fs::rename(&temp, self.path()).map_err(io)?;
        self.fault_at(FaultPoint::AfterRename)?;
        // Make the rename itself durable.
        if let Ok(dir) = File::open(&self.dir) {
            let _ = dir.sync_all();
        }
        self.doc = next;
        Ok(())
    }
}
