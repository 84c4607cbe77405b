//! Enumeration of symmetrically distinct solutions of finite-domain CSPs.
//!
//! Symmetries are broken statically with lexleader constraints drawn from the
//! LEX class (strictly increasing left-hand indices, each left index no later
//! than its paired right index). Two engines are provided:
//!
//! - [`search::enumerate_lcsp`] enumerates CSPs made only of LEX constraints
//!   without ever failing, so the delay between solutions is polynomial.
//! - [`search::enumerate_with_symmetry`] combines problem constraints with the
//!   lexleaders of a set of involution symmetries, asking an extendability
//!   [`oracle::Oracle`] before descending. Delay is polynomial in oracle calls.
//!
//! Every run reports [`search::DelayMetrics`], one record per gap between
//! consecutive solutions, so the delay bounds can be checked empirically.

pub mod error;
pub mod format;
pub mod lex;
pub mod model;
pub mod oracle;
pub mod search;
pub mod symmetry;

pub use error::{Error, Result};
pub use lex::{GeneralLexLeader, LexLeq};
pub use model::{Constraint, Csp, Domain, Domains, PartialAssignment, Value, VarId};
pub use oracle::{AlldiffOracle, ExactOracle, Oracle, OracleQuery};
pub use search::{DelayMetrics, Enumeration, SearchConfig, SearchOrder, SolutionSink, Termination};
pub use symmetry::Permutation;
