//! Event-state trigger-action rules for a smart home: a typed capability
//! model, a small rule language, a deterministic execution engine, a static
//! analyzer and a grading harness for authoring tasks.

pub mod analyzer;
pub mod capability;
pub mod diagnostic;
pub mod dsl;
pub mod engine;
pub mod fixtures;
pub mod grade;
pub mod rule;
pub mod scenario;

pub use capability::{CapabilityRegistry, ModelError, Value, WorldState};
pub use diagnostic::{Diagnostic, DiagnosticKind, Severity, Witness};
pub use engine::{run_simulation, EmissionTrace, EngineConfig, EngineError, Timeline};
pub use rule::{Rule, RuleId};
