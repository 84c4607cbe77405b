use thiserror::Error;

use crate::model::ValidationIssue;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("invalid instance: {}", format_issues(.0))]
    Invalid(Vec<ValidationIssue>),

    #[error("not a permutation of 1..{len}: {detail}")]
    NotBijection { len: usize, detail: String },

    #[error("not an involution")]
    NotInvolution,

    #[error("constraint {index} is not in LEX under the search order")]
    NotInLex { index: usize },

    #[error("lex constraint sides differ in length ({lhs} vs {rhs})")]
    LexLengthMismatch { lhs: usize, rhs: usize },

    #[error("assignment is partial: {assigned} of {total} variables assigned")]
    PartialAssignment { assigned: usize, total: usize },

    #[error("x{} assigned twice", .var + 1)]
    AlreadyAssigned { var: usize },

    #[error("domain of x{} is not an interval", .var + 1)]
    NotInterval { var: usize },

    #[error("{what} exceeds cap of {cap}")]
    CapExceeded { what: &'static str, cap: u64 },

    #[error("domains of x{} and x{} differ; variable symmetry is ill-defined", .a + 1, .b + 1)]
    DomainMismatch { a: usize, b: usize },

    #[error("generator maps a solution outside the solution set")]
    NotClosed,

    #[error("instance is not an alldifferent clique: {0}")]
    NotAlldiffClique(String),

    #[error("oracle node budget of {0} exhausted")]
    OracleBudgetExhausted(u64),
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
