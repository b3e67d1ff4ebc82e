use serde::Serialize;

use sensation_core::analyzer::AnalyzerError;
use sensation_core::dsl::{ImportError, ParseError, SourceSpan};
use sensation_core::engine::EngineError;
use sensation_core::grade::GradeError;
use sensation_core::rule::{RuleId, Violation, ViolationKind};
use sensation_core::scenario::ScenarioError;
use sensation_core::ModelError;

use crate::store::StoreError;

/// Machine codes carried by every error response. The set is closed.
pub const CODES: [&str; 14] = [
    "PARSE_ERROR",
    "KIND_MISMATCH",
    "VALIDATION_ERROR",
    "INVALID_TIMELINE",
    "BAD_REQUEST",
    "NOT_FOUND",
    "METHOD_NOT_ALLOWED",
    "UNKNOWN_DEVICE",
    "UNKNOWN_SCENARIO",
    "UNKNOWN_TASK",
    "STALE_REVISION",
    "DOMAIN_TOO_LARGE",
    "STORAGE_ERROR",
    "INTERNAL",
];

#[derive(Debug, thiserror::Error)]
pub enum OpError {
    #[error("{0}")]
    Parse(ParseError),
    #[error("rule {rule} is invalid: {}", .violations.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid { rule: RuleId, violations: Vec<Violation> },
    #[error("{0}")]
    Timeline(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("method not allowed")]
    MethodNotAllowed,
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("stale revision {given}; the store is at revision {current}")]
    StaleRevision { given: u64, current: u64 },
    #[error("{0}")]
    DomainTooLarge(String),
    #[error("{0}")]
    Storage(String),
    #[error("{0}")]
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    span: Option<SourceSpan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected: Option<&'a [String]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    violations: Option<&'a [Violation]>,
}

impl OpError {
    pub fn code(&self) -> &'static str {
        match self {
            OpError::Parse(_) => "PARSE_ERROR",
            OpError::Invalid { violations, .. } => {
                if violations.iter().any(|v| v.kind == ViolationKind::KindMismatch) {
                    "KIND_MISMATCH"
                } else {
                    "VALIDATION_ERROR"
                }
            }
            OpError::Timeline(_) => "INVALID_TIMELINE",
            OpError::BadRequest(_) => "BAD_REQUEST",
            OpError::NotFound(_) => "NOT_FOUND",
            OpError::MethodNotAllowed => "METHOD_NOT_ALLOWED",
            OpError::UnknownDevice(_) => "UNKNOWN_DEVICE",
            OpError::UnknownScenario(_) => "UNKNOWN_SCENARIO",
            OpError::UnknownTask(_) => "UNKNOWN_TASK",
            OpError::StaleRevision { .. } => "STALE_REVISION",
            OpError::DomainTooLarge(_) => "DOMAIN_TOO_LARGE",
            OpError::Storage(_) => "STORAGE_ERROR",
            OpError::Internal(_) => "INTERNAL",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            OpError::Parse(_) | OpError::BadRequest(_) => 400,
            OpError::NotFound(_) | OpError::UnknownDevice(_) | OpError::UnknownScenario(_) | OpError::UnknownTask(_) => 404,
            OpError::MethodNotAllowed => 405,
            OpError::StaleRevision { .. } => 409,
            OpError::Invalid { .. } | OpError::Timeline(_) | OpError::DomainTooLarge(_) => 422,
            OpError::Storage(_) | OpError::Internal(_) => 500,
        }
    }

    /// 2 for input the tools reject, 3 for I/O trouble.
    pub fn exit_code(&self) -> u8 {
        match self {
            OpError::Storage(_) | OpError::Internal(_) => 3,
            _ => 2,
        }
    }

    /// `{"error": {...}}` document, newline terminated.
    pub fn to_json(&self) -> String {
        let (span, expected) = match self {
            OpError::Parse(e) => (Some(e.span), Some(e.expected.as_slice())),
            _ => (None, None),
        };
        let violations = match self {
            OpError::Invalid { violations, .. } => Some(violations.as_slice()),
            _ => None,
        };
        let body = ErrorBody {
            code: self.code(),
            message: self.to_string(),
            span,
            expected,
            violations,
        };
        crate::ops::render(&serde_json::json!({ "error": body }))
    }
}

impl From<ParseError> for OpError {
    fn from(e: ParseError) -> Self {
        OpError::Parse(e)
    }
}

impl From<EngineError> for OpError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Validation { rule, violations } => OpError::Invalid { rule, violations },
            EngineError::DuplicateRuleId(_) | EngineError::InvalidConfig => OpError::BadRequest(e.to_string()),
            EngineError::UnsortedTimeline { .. } | EngineError::Timeline { .. } => OpError::Timeline(e.to_string()),
            EngineError::DepthExceeded { .. } | EngineError::Model(_) => OpError::Internal(e.to_string()),
        }
    }
}

impl From<AnalyzerError> for OpError {
    fn from(e: AnalyzerError) -> Self {
        match e {
            AnalyzerError::DomainTooLarge { .. } => OpError::DomainTooLarge(e.to_string()),
            AnalyzerError::InvalidRule { rule, violations } => OpError::Invalid { rule, violations },
            AnalyzerError::DuplicateRuleId(_) => OpError::BadRequest(e.to_string()),
            AnalyzerError::Model(_) => OpError::Internal(e.to_string()),
        }
    }
}

impl From<GradeError> for OpError {
    fn from(e: GradeError) -> Self {
        match e {
            GradeError::InvalidCandidate { rule, violations } => OpError::Invalid { rule, violations },
        }
    }
}

impl From<ScenarioError> for OpError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Engine(e) => e.into(),
            ScenarioError::Grade(e) => e.into(),
            ScenarioError::Analyzer(e) => e.into(),
            other => OpError::BadRequest(other.to_string()),
        }
    }
}

impl From<ImportError> for OpError {
    fn from(e: ImportError) -> Self {
        OpError::BadRequest(e.to_string())
    }
}

impl From<ModelError> for OpError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::UnknownDevice(d) => OpError::UnknownDevice(d),
            other => OpError::BadRequest(other.to_string()),
        }
    }
}

impl From<StoreError> for OpError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => OpError::NotFound(format!("no rule `{id}`")),
            StoreError::Stale { given, current } => OpError::StaleRevision { given, current },
            StoreError::Invalid { rule, violations } => OpError::Invalid { rule, violations },
            StoreError::Io(_) | StoreError::Corrupt(_) | StoreError::Crashed(_) => OpError::Storage(e.to_string()),
        }
    }
}
