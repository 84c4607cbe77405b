//! Enumeration engines and delay instrumentation.
//!
//! All engines share one chronological backtracking core: the next variable
//! of the [`SearchOrder`] is tentatively set to its smallest remaining value,
//! GAC is enforced to fixpoint, and (for [`enumerate_with_symmetry`]) an
//! [`Oracle`] is asked whether the prefix still extends to a solution of the
//! problem constraints. A rejected value is removed from its domain and the
//! removal is propagated before the next value is tried. Domains are restored
//! from the trail when a level is exhausted.

use std::cmp::Ordering;
use std::io::{self, Write};
use std::ops::ControlFlow;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::lex::{self, LexLeq};
use crate::model::{Constraint, Csp, Domain, Domains, PartialAssignment, Propagator, Value, VarId};
use crate::oracle::{Oracle, OracleQuery};
use crate::symmetry::{apply_symmetry, generate_group, Permutation};

/// Variable order shared by lexleader construction and branching.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SearchOrder {
    order: Vec<VarId>,
}

impl SearchOrder {
    pub fn new(order: Vec<VarId>) -> Result<Self> {
        Permutation::new(order.clone())?;
        Ok(SearchOrder { order })
    }

    pub fn identity(n: usize) -> Self {
        SearchOrder {
            order: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(i, &x)| i == x)
    }

    pub fn as_slice(&self) -> &[VarId] {
        &self.order
    }

    /// `positions()[x]` is the position of variable `x`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &x) in self.order.iter().enumerate() {
            pos[x] = p;
        }
        pos
    }

    /// Values of a total assignment listed in search order.
    pub fn project(&self, values: &[Value]) -> Vec<Value> {
        self.order.iter().map(|&x| values[x]).collect()
    }

    /// Lexicographic comparison of two total assignments in search order.
    pub fn compare(&self, a: &[Value], b: &[Value]) -> Ordering {
        self.order
            .iter()
            .map(|&x| a[x].cmp(&b[x]))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// Counters for one gap: start to first solution, between two consecutive
/// solutions, or last solution to termination.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GapMetrics {
    pub nodes: u64,
    pub values_rejected: u64,
    pub propagations: u64,
    pub oracle_calls: u64,
    pub wall_ns: u64,
}

impl GapMetrics {
    fn add(&mut self, other: &GapMetrics) {
        self.nodes += other.nodes;
        self.values_rejected += other.values_rejected;
        self.propagations += other.propagations;
        self.oracle_calls += other.oracle_calls;
        self.wall_ns += other.wall_ns;
    }
}

/// Per-gap delay records of one run. `gaps.len()` is the number of emitted
/// solutions plus one, and the gaps sum to `totals`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DelayMetrics {
    pub gaps: Vec<GapMetrics>,
    pub totals: GapMetrics,
    /// Expanded nodes that do not lie on a path to an emitted solution.
    pub failed_node_count: u64,
    pub solutions: u64,
}

pub const METRICS_CSV_HEADER: &str = "gap_index,nodes,values_rejected,propagations,oracle_calls,wall_ns";

impl DelayMetrics {
    pub fn max_nodes_per_gap(&self) -> u64 {
        self.gaps.iter().map(|g| g.nodes).max().unwrap_or(0)
    }

    pub fn max_oracle_calls_per_gap(&self) -> u64 {
        self.gaps.iter().map(|g| g.oracle_calls).max().unwrap_or(0)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{METRICS_CSV_HEADER}")?;
        for (i, g) in self.gaps.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{},{},{},{}",
                g.nodes, g.values_rejected, g.propagations, g.oracle_calls, g.wall_ns
            )?;
        }
        Ok(())
    }

    /// Merges gaps so that only the solutions at `kept` (indices into the
    /// original emission sequence, ascending) delimit them.
    pub fn coarsen(&self, kept: &[usize]) -> DelayMetrics {
        let mut gaps = Vec::with_capacity(kept.len() + 1);
        let mut current = GapMetrics::default();
        let mut next = kept.iter().peekable();
        for (i, g) in self.gaps.iter().enumerate() {
            current.add(g);
            if next.peek() == Some(&&i) {
                next.next();
                gaps.push(std::mem::take(&mut current));
            }
        }
        gaps.push(current);
        DelayMetrics {
            gaps,
            totals: self.totals,
            failed_node_count: self.failed_node_count,
            solutions: kept.len() as u64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Completed,
    /// The sink asked to stop.
    Stopped,
    NodeBudgetExhausted,
    OracleBudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enumeration {
    pub termination: Termination,
    pub metrics: DelayMetrics,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchConfig {
    pub node_budget: Option<u64>,
    pub oracle_call_budget: Option<u64>,
    /// Accept lex constraints outside LEX for the search order. Emitted
    /// solutions stay correct but the delay guarantees no longer hold.
    pub allow_non_lex: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    /// Propagation wiped out a domain.
    Conflict,
    /// The oracle found no extension.
    OracleRejected,
    /// Children were tried but none led to a solution.
    DeadEnd,
}

/// Receives solutions (indexed by variable) as they are found.
pub trait SolutionSink {
    fn solution(&mut self, values: &[Value]) -> ControlFlow<()>;

    /// Called for every failed node with the decisions leading to it, the
    /// failed one last.
    fn failure(&mut self, _kind: FailureKind, _path: &[(VarId, Value)]) {}
}

impl SolutionSink for Vec<Vec<Value>> {
    fn solution(&mut self, values: &[Value]) -> ControlFlow<()> {
        self.push(values.to_vec());
        ControlFlow::Continue(())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Counter(pub u64);

impl SolutionSink for Counter {
    fn solution(&mut self, _values: &[Value]) -> ControlFlow<()> {
        self.0 += 1;
        ControlFlow::Continue(())
    }
}

/// Adapts a closure into a sink.
pub struct FnSink<F>(pub F);

impl<F: FnMut(&[Value]) -> ControlFlow<()>> SolutionSink for FnSink<F> {
    fn solution(&mut self, values: &[Value]) -> ControlFlow<()> {
        (self.0)(values)
    }
}

enum Halt {
    Stop(Termination),
    Fail(Error),
}

impl From<Error> for Halt {
    fn from(e: Error) -> Self {
        Halt::Fail(e)
    }
}

struct Recorder {
    current: GapMetrics,
    gap_start: Instant,
    metrics: DelayMetrics,
}

impl Recorder {
    fn new() -> Self {
        Recorder {
            current: GapMetrics::default(),
            gap_start: Instant::now(),
            metrics: DelayMetrics::default(),
        }
    }

    fn close_gap(&mut self) {
        let now = Instant::now();
        self.current.wall_ns = (now - self.gap_start).as_nanos() as u64;
        self.gap_start = now;
        self.metrics.totals.add(&self.current);
        self.metrics.gaps.push(std::mem::take(&mut self.current));
    }
}

struct Engine<'a, 's> {
    order: &'a [VarId],
    propagator: Propagator<'a>,
    oracle: Option<(&'a Csp, &'s mut dyn Oracle)>,
    doms: Domains,
    path: Vec<(VarId, Value)>,
    assignment: PartialAssignment,
    sink: &'s mut dyn SolutionSink,
    config: SearchConfig,
    rec: Recorder,
}

impl<'a, 's> Engine<'a, 's> {
    fn run(mut self) -> Result<Enumeration> {
        let outcome = match self.propagator.propagate_all(&mut self.doms) {
            Err(_) => Ok(false),
            Ok(events) => {
                self.rec.current.propagations += events;
                if self.order.is_empty() {
                    self.leaf()
                } else {
                    self.descend(0)
                }
            }
        };
        let termination = match outcome {
            Ok(_) => Termination::Completed,
            Err(Halt::Stop(t)) => t,
            Err(Halt::Fail(e)) => return Err(e),
        };
        self.rec.close_gap();
        Ok(Enumeration {
            termination,
            metrics: self.rec.metrics,
        })
    }

    fn propagate(&mut self, var: VarId) -> bool {
        let (events, ok) = self.propagator.propagate_from_counted(&mut self.doms, &[var]);
        self.rec.current.propagations += events;
        ok
    }

    fn ask_oracle(&mut self) -> Result<bool, Halt> {
        let Some((csp, oracle)) = self.oracle.as_mut() else {
            return Ok(true);
        };
        if let Some(b) = self.config.oracle_call_budget {
            if self.rec.metrics.totals.oracle_calls + self.rec.current.oracle_calls >= b {
                return Err(Halt::Stop(Termination::OracleBudgetExhausted));
            }
        }
        self.rec.current.oracle_calls += 1;
        let q = OracleQuery {
            csp,
            domains: self.doms.as_slice(),
            assignment: &self.assignment,
        };
        Ok(oracle.extends(&q)?)
    }

    /// Handles a complete assignment. Returns whether it was emitted.
    fn leaf(&mut self) -> Result<bool, Halt> {
        if self.order.is_empty() && !self.ask_oracle()? {
            return Ok(false);
        }
        let values = self
            .doms
            .ground_values()
            .expect("every variable is assigned at a leaf");
        self.rec.metrics.solutions += 1;
        let flow = self.sink.solution(&values);
        self.rec.close_gap();
        match flow {
            ControlFlow::Continue(()) => Ok(true),
            ControlFlow::Break(()) => Err(Halt::Stop(Termination::Stopped)),
        }
    }

    /// Explores every value of `order[level]`. Returns whether any solution
    /// was emitted below.
    fn descend(&mut self, level: usize) -> Result<bool, Halt> {
        let var = self.order[level];
        let last = level + 1 == self.order.len();
        self.doms.push_marker();
        let mut found_any = false;
        while let Some(d) = self.doms.get(var).min() {
            if let Some(b) = self.config.node_budget {
                if self.rec.metrics.totals.nodes + self.rec.current.nodes >= b {
                    return Err(Halt::Stop(Termination::NodeBudgetExhausted));
                }
            }
            self.rec.current.nodes += 1;
            self.doms.push_marker();
            self.doms.assign(var, d);
            self.path.push((var, d));
            self.assignment.assign(var, d).expect("variable is unassigned at its level");

            let failure = if !self.propagate(var) {
                Some(FailureKind::Conflict)
            } else if !self.ask_oracle()? {
                Some(FailureKind::OracleRejected)
            } else {
                let found = if last { self.leaf()? } else { self.descend(level + 1)? };
                found_any |= found;
                (!found).then_some(FailureKind::DeadEnd)
            };
            if let Some(kind) = failure {
                self.rec.metrics.failed_node_count += 1;
                self.sink.failure(kind, &self.path);
            }

            self.assignment.unassign(var);
            self.path.pop();
            self.doms.pop_marker();

            self.rec.current.values_rejected += 1;
            self.doms.remove(var, d);
            if self.doms.get(var).is_empty() || !self.propagate(var) {
                break;
            }
        }
        self.doms.pop_marker();
        Ok(found_any)
    }
}

fn check_domains(n: usize, domains: &[Domain], order: &SearchOrder) -> Result<()> {
    if order.len() != n || domains.len() != n {
        return Err(Error::Invalid(vec![crate::model::ValidationIssue::BadOrder { n }]));
    }
    Ok(())
}

fn check_lex(family: &[LexLeq], order: &SearchOrder, config: &SearchConfig) -> Result<()> {
    if config.allow_non_lex {
        return Ok(());
    }
    match family.iter().position(|c| !c.is_in_lex_under(order)) {
        Some(index) => Err(Error::NotInLex { index }),
        None => Ok(()),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_engine<'a, 's>(
    n: usize,
    problem: &'a [Constraint],
    lex: &'a [LexLeq],
    domains: &[Domain],
    order: &'a SearchOrder,
    oracle: Option<(&'a Csp, &'s mut dyn Oracle)>,
    sink: &'s mut dyn SolutionSink,
    config: &SearchConfig,
) -> Result<Enumeration> {
    Engine {
        order: order.as_slice(),
        propagator: Propagator::new(n, problem, lex),
        oracle,
        doms: Domains::new(domains.to_vec()),
        path: Vec::with_capacity(n),
        assignment: PartialAssignment::new(),
        sink,
        config: *config,
        rec: Recorder::new(),
    }
    .run()
}

/// Failure-free enumeration of a CSP whose only constraints are `lex_family`.
///
/// Solutions are emitted in ascending lexicographic order with respect to
/// `order`. The family must be in LEX under `order` and every domain an
/// interval; the first solution is then the all-min and the last the all-max
/// assignment.
pub fn enumerate_lcsp(
    lex_family: &[LexLeq],
    domains: &[Domain],
    order: &SearchOrder,
    sink: &mut dyn SolutionSink,
    config: &SearchConfig,
) -> Result<Enumeration> {
    check_domains(domains.len(), domains, order)?;
    check_lex(lex_family, order, config)?;
    if let Some(var) = domains.iter().position(|d| !d.is_interval()) {
        return Err(Error::NotInterval { var });
    }
    run_engine(domains.len(), &[], lex_family, domains, order, None, sink, config)
}

/// The lex family that symmetry-breaking search propagates: the explicit lex
/// constraints of `csp` followed by the reduced lexleader of each symmetry.
pub fn symmetry_lex_family(csp: &Csp, symmetries: &[Permutation], order: &SearchOrder) -> Result<Vec<LexLeq>> {
    let mut family = csp.lex_constraints.clone();
    for s in symmetries {
        if s.len() != csp.n() {
            return Err(Error::NotBijection {
                len: csp.n(),
                detail: format!("symmetry over {} variables", s.len()),
            });
        }
        family.push(lex::reduce_under_order(s, order)?);
    }
    Ok(family)
}

/// All solutions of `csp` satisfying the reduced lexleader constraints of
/// `symmetries` (plus any explicit lex constraints of `csp`), in ascending
/// lexicographic order.
///
/// Only the lex family is propagated; the problem constraints are consulted
/// through `oracle` after every tentative assignment, with the current
/// reduced domains.
pub fn enumerate_with_symmetry(
    csp: &Csp,
    symmetries: &[Permutation],
    oracle: &mut dyn Oracle,
    order: &SearchOrder,
    sink: &mut dyn SolutionSink,
    config: &SearchConfig,
) -> Result<Enumeration> {
    check_domains(csp.n(), &csp.domains, order)?;
    let family = symmetry_lex_family(csp, symmetries, order)?;
    check_lex(&family, order, config)?;
    run_engine(
        csp.n(),
        &[],
        &family,
        &csp.domains,
        order,
        Some((csp, oracle)),
        sink,
        config,
    )
}

/// Plain maintained-GAC enumeration over every problem and lex constraint of
/// `csp`, without symmetry handling.
pub fn enumerate_all(
    csp: &Csp,
    order: &SearchOrder,
    sink: &mut dyn SolutionSink,
    config: &SearchConfig,
) -> Result<Enumeration> {
    check_domains(csp.n(), &csp.domains, order)?;
    run_engine(
        csp.n(),
        &csp.constraints,
        &csp.lex_constraints,
        &csp.domains,
        order,
        None,
        sink,
        config,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    pub group: u64,
    pub assignments: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            group: 100_000,
            assignments: 100_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerateAndTest {
    /// Lexicographically least member (in search order) of each orbit.
    pub canonical: Vec<Vec<Value>>,
    /// Solutions of the problem constraints examined.
    pub enumerated: u64,
    pub group_size: usize,
    /// Gaps delimited by canonical emissions.
    pub metrics: DelayMetrics,
}

/// Baseline: enumerate every solution of the problem constraints and keep
/// those that are the least member of their orbit under the group generated
/// by `symmetries`.
pub fn enumerate_generate_and_test(
    csp: &Csp,
    symmetries: &[Permutation],
    order: &SearchOrder,
    caps: &Caps,
) -> Result<GenerateAndTest> {
    check_domains(csp.n(), &csp.domains, order)?;
    let space = csp
        .domains
        .iter()
        .map(|d| d.size() as u64)
        .try_fold(1u64, |acc, s| acc.checked_mul(s))
        .unwrap_or(u64::MAX);
    if space > caps.assignments {
        return Err(Error::CapExceeded {
            what: "assignment space",
            cap: caps.assignments,
        });
    }
    let group = generate_group(csp.n(), symmetries, caps.group)?;
    let mut canonical = Vec::new();
    let mut kept = Vec::new();
    let mut seen = 0usize;
    let mut sink = FnSink(|s: &[Value]| {
        let least = group
            .iter()
            .all(|g| order.compare(s, &apply_symmetry(g, s)) != Ordering::Greater);
        if least {
            canonical.push(s.to_vec());
            kept.push(seen);
        }
        seen += 1;
        ControlFlow::Continue(())
    });
    let run = run_engine(
        csp.n(),
        &csp.constraints,
        &[],
        &csp.domains,
        order,
        None,
        &mut sink,
        &SearchConfig::default(),
    )?;
    let metrics = run.metrics.coarsen(&kept);
    Ok(GenerateAndTest {
        enumerated: run.metrics.solutions,
        canonical,
        group_size: group.len(),
        metrics,
    })
}
