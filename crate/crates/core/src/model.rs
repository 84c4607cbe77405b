//! Core CSP representation: variables, backtrackable domains, problem
//! constraints, assignments and generic GAC propagation.
//!
//! Variables are 0-based internally. The instance file format is 1-based and
//! converts at the boundary (see [`crate::format`]).

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use thiserror::Error;

use crate::error::{Error, Result};
use crate::lex::{self, LexLeq};
use crate::search::SearchOrder;
use crate::symmetry::Permutation;

pub type Value = i64;
pub type VarId = usize;

/// A finite integer domain that starts as the interval `[initial_min,
/// initial_max]` and may acquire holes through propagation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Domain {
    initial_min: Value,
    initial_max: Value,
    present: Vec<bool>,
    size: usize,
}

impl Domain {
    /// The interval `[min, max]`. Empty when `min > max`.
    pub fn interval(min: Value, max: Value) -> Self {
        let len = if min > max { 0 } else { (max - min + 1) as usize };
        Domain {
            initial_min: min,
            initial_max: max,
            present: vec![true; len],
            size: len,
        }
    }

    /// Smallest interval covering `values`, with everything else removed.
    pub fn from_values<I: IntoIterator<Item = Value>>(values: I) -> Self {
        let set: BTreeSet<Value> = values.into_iter().collect();
        let (Some(&lo), Some(&hi)) = (set.first(), set.last()) else {
            return Domain::interval(0, -1);
        };
        let mut d = Domain::interval(lo, hi);
        for v in lo..=hi {
            if !set.contains(&v) {
                d.remove(v);
            }
        }
        d
    }

    pub fn initial_min(&self) -> Value {
        self.initial_min
    }

    pub fn initial_max(&self) -> Value {
        self.initial_max
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn is_singleton(&self) -> bool {
        self.size == 1
    }

    pub fn contains(&self, v: Value) -> bool {
        self.offset(v).is_some_and(|i| self.present[i])
    }

    pub fn min(&self) -> Option<Value> {
        self.present
            .iter()
            .position(|&p| p)
            .map(|i| self.initial_min + i as Value)
    }

    pub fn max(&self) -> Option<Value> {
        self.present
            .iter()
            .rposition(|&p| p)
            .map(|i| self.initial_min + i as Value)
    }

    pub fn values(&self) -> impl Iterator<Item = Value> + '_ {
        let base = self.initial_min;
        self.present
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(move |(i, _)| base + i as Value)
    }

    /// True iff the present values form a contiguous run.
    pub fn is_interval(&self) -> bool {
        match (self.min(), self.max()) {
            (Some(lo), Some(hi)) => (hi - lo + 1) as usize == self.size,
            _ => true,
        }
    }

    /// Untrailed removal. Returns whether `v` was present.
    pub(crate) fn remove(&mut self, v: Value) -> bool {
        match self.offset(v) {
            Some(i) if self.present[i] => {
                self.present[i] = false;
                self.size -= 1;
                true
            }
            _ => false,
        }
    }

    fn restore(&mut self, v: Value) {
        let i = self.offset(v).expect("restored value lies in the initial interval");
        debug_assert!(!self.present[i]);
        self.present[i] = true;
        self.size += 1;
    }

    fn offset(&self, v: Value) -> Option<usize> {
        (v >= self.initial_min && v <= self.initial_max).then(|| (v - self.initial_min) as usize)
    }
}

/// Removal log with restore markers.
#[derive(Clone, Debug, Default)]
pub struct Trail {
    removed: Vec<(VarId, Value)>,
    markers: Vec<usize>,
}

impl Trail {
    pub fn len(&self) -> usize {
        self.removed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty()
    }

    /// Number of open markers.
    pub fn depth(&self) -> usize {
        self.markers.len()
    }

    /// Removals recorded since trail position `from`.
    pub fn since(&self, from: usize) -> &[(VarId, Value)] {
        &self.removed[from..]
    }
}

/// Current domains of all variables plus the trail that undoes their
/// reductions.
#[derive(Clone, Debug)]
pub struct Domains {
    doms: Vec<Domain>,
    trail: Trail,
}

impl Domains {
    pub fn new(doms: Vec<Domain>) -> Self {
        Domains {
            doms,
            trail: Trail::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.doms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doms.is_empty()
    }

    pub fn get(&self, var: VarId) -> &Domain {
        &self.doms[var]
    }

    pub fn as_slice(&self) -> &[Domain] {
        &self.doms
    }

    pub fn trail(&self) -> &Trail {
        &self.trail
    }

    /// Removes `v` from the domain of `var`, recording it on the trail.
    pub fn remove(&mut self, var: VarId, v: Value) -> bool {
        let removed = self.doms[var].remove(v);
        if removed {
            self.trail.removed.push((var, v));
        }
        removed
    }

    /// Keeps only the values of `var` accepted by `keep`. Returns whether
    /// anything was removed.
    pub fn retain(&mut self, var: VarId, mut keep: impl FnMut(Value) -> bool) -> bool {
        let doomed: Vec<Value> = self.doms[var].values().filter(|&v| !keep(v)).collect();
        for &v in &doomed {
            self.remove(var, v);
        }
        !doomed.is_empty()
    }

    /// Reduces the domain of `var` to `{v}`.
    pub fn assign(&mut self, var: VarId, v: Value) -> bool {
        self.retain(var, |x| x == v)
    }

    pub fn push_marker(&mut self) {
        self.trail.markers.push(self.trail.removed.len());
    }

    /// Restores every domain to its contents at the most recent marker.
    pub fn pop_marker(&mut self) {
        let mark = self.trail.markers.pop().expect("pop_marker without push_marker");
        while self.trail.removed.len() > mark {
            let (var, v) = self.trail.removed.pop().expect("non-empty");
            self.doms[var].restore(v);
        }
    }

    /// Value of every variable if all domains are singletons.
    pub fn ground_values(&self) -> Option<Vec<Value>> {
        self.doms
            .iter()
            .map(|d| d.is_singleton().then(|| d.min()).flatten())
            .collect()
    }
}

/// Outcome of running one propagator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Propagation {
    Unchanged,
    Revised,
    Conflict,
}

impl Propagation {
    pub(crate) fn from_change(changed: bool) -> Self {
        if changed {
            Propagation::Revised
        } else {
            Propagation::Unchanged
        }
    }
}

/// A domain wipeout.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("domain wipeout")]
pub struct Conflict;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Constraint {
    /// Positive table: `tuples` lists the allowed value combinations of
    /// `scope`.
    Extensional {
        scope: Vec<VarId>,
        tuples: Vec<Vec<Value>>,
    },
    NotEqual(VarId, VarId),
    UnaryIn { var: VarId, values: BTreeSet<Value> },
}

impl Constraint {
    pub fn scope(&self) -> Vec<VarId> {
        match self {
            Constraint::Extensional { scope, .. } => scope.clone(),
            Constraint::NotEqual(a, b) => vec![*a, *b],
            Constraint::UnaryIn { var, .. } => vec![*var],
        }
    }

    /// Whether the total assignment `values` (indexed by variable) is allowed.
    pub fn allows(&self, values: &[Value]) -> bool {
        match self {
            Constraint::Extensional { scope, tuples } => tuples
                .iter()
                .any(|t| scope.iter().zip(t).all(|(&x, &v)| values[x] == v)),
            Constraint::NotEqual(a, b) => values[*a] != values[*b],
            Constraint::UnaryIn { var, values: set } => set.contains(&values[*var]),
        }
    }

    /// Makes this constraint GAC over `doms`.
    pub fn enforce_gac(&self, doms: &mut Domains) -> Propagation {
        match self {
            Constraint::Extensional { scope, tuples } => {
                let mut supported: Vec<HashSet<Value>> = vec![HashSet::new(); scope.len()];
                for t in tuples {
                    if scope.iter().zip(t).all(|(&x, &v)| doms.get(x).contains(v)) {
                        for (p, &v) in t.iter().enumerate() {
                            supported[p].insert(v);
                        }
                    }
                }
                let mut changed = false;
                for (p, &x) in scope.iter().enumerate() {
                    changed |= doms.retain(x, |v| supported[p].contains(&v));
                    if doms.get(x).is_empty() {
                        return Propagation::Conflict;
                    }
                }
                Propagation::from_change(changed)
            }
            Constraint::NotEqual(a, b) => {
                let mut changed = false;
                for (x, y) in [(*a, *b), (*b, *a)] {
                    if let (true, Some(v)) = (doms.get(y).is_singleton(), doms.get(y).min()) {
                        changed |= doms.remove(x, v);
                        if doms.get(x).is_empty() {
                            return Propagation::Conflict;
                        }
                    }
                }
                // a second pass catches x becoming singleton after the first removal
                for (x, y) in [(*a, *b), (*b, *a)] {
                    if let (true, Some(v)) = (doms.get(y).is_singleton(), doms.get(y).min()) {
                        changed |= doms.remove(x, v);
                        if doms.get(x).is_empty() {
                            return Propagation::Conflict;
                        }
                    }
                }
                Propagation::from_change(changed)
            }
            Constraint::UnaryIn { var, values } => {
                let changed = doms.retain(*var, |v| values.contains(&v));
                if doms.get(*var).is_empty() {
                    Propagation::Conflict
                } else {
                    Propagation::from_change(changed)
                }
            }
        }
    }

    /// Number of allowed tuples over `initial` domains, as charged by the size
    /// measure.
    fn relation_size(&self, initial: &[Domain]) -> usize {
        match self {
            Constraint::Extensional { tuples, .. } => tuples.len(),
            Constraint::NotEqual(a, b) => {
                let (da, db) = (&initial[*a], &initial[*b]);
                da.size() * db.size() - da.values().filter(|&v| db.contains(v)).count()
            }
            Constraint::UnaryIn { var, values } => {
                values.iter().filter(|&&v| initial[*var].contains(v)).count()
            }
        }
    }
}

/// A structural defect found by [`Csp::validate`].
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ValidationIssue {
    #[error("x{}: empty domain", .var + 1)]
    EmptyDomain { var: VarId },
    #[error("constraint {constraint}: scope out of range (x{})", .var + 1)]
    ScopeOutOfRange { constraint: usize, var: VarId },
    #[error("constraint {constraint}: x{} repeated in scope", .var + 1)]
    RepeatedScopeVariable { constraint: usize, var: VarId },
    #[error("constraint {constraint}: arity mismatch (tuple of {found} under scope of {expected})")]
    ArityMismatch {
        constraint: usize,
        expected: usize,
        found: usize,
    },
    #[error("constraint {constraint}: tuple value {value} outside domain of x{}", .var + 1)]
    TupleOutsideDomain {
        constraint: usize,
        var: VarId,
        value: Value,
    },
    #[error("constraint {constraint}: duplicate tuple")]
    DuplicateTuple { constraint: usize },
    #[error("lex constraint {index}: sides differ in length")]
    LexLengthMismatch { index: usize },
    #[error("lex constraint {index}: scope out of range (x{})", .var + 1)]
    LexOutOfRange { index: usize, var: VarId },
    #[error("symmetry {index}: not a permutation of the {n} variables")]
    BadSymmetry { index: usize, n: usize },
    #[error("search order is not a permutation of the {n} variables")]
    BadOrder { n: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Csp {
    pub name: String,
    pub domains: Vec<Domain>,
    pub constraints: Vec<Constraint>,
    pub symmetries: Vec<Permutation>,
    pub lex_constraints: Vec<LexLeq>,
    pub order: SearchOrder,
}

impl Csp {
    pub fn new(name: impl Into<String>, domains: Vec<Domain>) -> Self {
        let n = domains.len();
        Csp {
            name: name.into(),
            domains,
            constraints: Vec::new(),
            symmetries: Vec::new(),
            lex_constraints: Vec::new(),
            order: SearchOrder::identity(n),
        }
    }

    /// `n` variables sharing the interval `[min, max]`.
    pub fn uniform(name: impl Into<String>, n: usize, min: Value, max: Value) -> Self {
        Csp::new(name, vec![Domain::interval(min, max); n])
    }

    /// Alldifferent over `vars`, decomposed into pairwise `≠`.
    pub fn add_alldiff(&mut self, vars: &[VarId]) {
        for (i, &a) in vars.iter().enumerate() {
            for &b in &vars[i + 1..] {
                self.constraints.push(Constraint::NotEqual(a, b));
            }
        }
    }

    pub fn n(&self) -> usize {
        self.domains.len()
    }

    /// Largest initial domain size.
    pub fn max_domain_size(&self) -> usize {
        self.domains.iter().map(Domain::size).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), Vec<ValidationIssue>> {
        let n = self.n();
        let mut issues = Vec::new();
        for (var, d) in self.domains.iter().enumerate() {
            if d.is_empty() {
                issues.push(ValidationIssue::EmptyDomain { var });
            }
        }
        for (ci, c) in self.constraints.iter().enumerate() {
            let scope = c.scope();
            let mut seen = HashSet::new();
            let mut in_range = true;
            for &var in &scope {
                if var >= n {
                    issues.push(ValidationIssue::ScopeOutOfRange { constraint: ci, var });
                    in_range = false;
                } else if !seen.insert(var) {
                    issues.push(ValidationIssue::RepeatedScopeVariable { constraint: ci, var });
                }
            }
            if let Constraint::Extensional { scope, tuples } = c {
                let mut distinct = HashSet::new();
                for t in tuples {
                    if t.len() != scope.len() {
                        issues.push(ValidationIssue::ArityMismatch {
                            constraint: ci,
                            expected: scope.len(),
                            found: t.len(),
                        });
                        continue;
                    }
                    if in_range {
                        for (&var, &value) in scope.iter().zip(t) {
                            if !self.domains[var].contains(value) {
                                issues.push(ValidationIssue::TupleOutsideDomain {
                                    constraint: ci,
                                    var,
                                    value,
                                });
                            }
                        }
                    }
                    if !distinct.insert(t) {
                        issues.push(ValidationIssue::DuplicateTuple { constraint: ci });
                    }
                }
            }
        }
        for (index, c) in self.lex_constraints.iter().enumerate() {
            if c.lhs.len() != c.rhs.len() {
                issues.push(ValidationIssue::LexLengthMismatch { index });
            }
            for &var in c.lhs.iter().chain(&c.rhs) {
                if var >= n {
                    issues.push(ValidationIssue::LexOutOfRange { index, var });
                }
            }
        }
        for (index, s) in self.symmetries.iter().enumerate() {
            if s.len() != n {
                issues.push(ValidationIssue::BadSymmetry { index, n });
            }
        }
        if self.order.len() != n {
            issues.push(ValidationIssue::BadOrder { n });
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    /// Instance size in bits: `log2 n + Σ |s|·|r|·log2 M` over problem
    /// constraints plus `2k·log2 n` per lex constraint with `k` pairs.
    ///
    /// `≠` and unary constraints are charged as their equivalent positive
    /// tables over the initial domains.
    pub fn instance_size(&self) -> f64 {
        let n = self.n() as f64;
        let log_n = if n > 0.0 { n.log2() } else { 0.0 };
        let m = self.max_domain_size().max(1) as f64;
        let extensional: f64 = self
            .constraints
            .iter()
            .map(|c| (c.scope().len() * c.relation_size(&self.domains)) as f64 * m.log2())
            .sum();
        let intensional: f64 = self
            .lex_constraints
            .iter()
            .map(|c| (2 * c.len()) as f64 * log_n)
            .sum();
        log_n + extensional + intensional
    }

    /// True iff `values` satisfies every problem and lex constraint.
    pub fn satisfies(&self, values: &[Value]) -> bool {
        values.len() == self.n()
            && values.iter().zip(&self.domains).all(|(&v, d)| d.contains(v))
            && self.constraints.iter().all(|c| c.allows(values))
            && self.lex_constraints.iter().all(|c| c.is_satisfied(values))
    }

    /// Whether the total assignment `a` is a solution.
    pub fn is_solution(&self, a: &PartialAssignment) -> Result<bool> {
        let values = a.to_total(self.n())?;
        Ok(self.satisfies(&values))
    }
}

/// Literals `x ↦ v`, no variable twice.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartialAssignment {
    literals: BTreeMap<VarId, Value>,
}

impl PartialAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_total(values: &[Value]) -> Self {
        PartialAssignment {
            literals: values.iter().copied().enumerate().collect(),
        }
    }

    pub fn assign(&mut self, var: VarId, v: Value) -> Result<()> {
        if self.literals.contains_key(&var) {
            return Err(Error::AlreadyAssigned { var });
        }
        self.literals.insert(var, v);
        Ok(())
    }

    pub fn unassign(&mut self, var: VarId) -> Option<Value> {
        self.literals.remove(&var)
    }

    pub fn get(&self, var: VarId) -> Option<Value> {
        self.literals.get(&var).copied()
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, Value)> + '_ {
        self.literals.iter().map(|(&x, &v)| (x, v))
    }

    /// Assigned variables are exactly the first `len()` positions of `order`.
    pub fn is_consecutive(&self, order: &SearchOrder) -> bool {
        self.len() <= order.len()
            && order.as_slice()[..self.len()]
                .iter()
                .all(|x| self.literals.contains_key(x))
    }

    pub fn to_total(&self, n: usize) -> Result<Vec<Value>> {
        (0..n)
            .map(|x| self.get(x))
            .collect::<Option<Vec<_>>>()
            .filter(|_| self.len() == n)
            .ok_or(Error::PartialAssignment {
                assigned: self.len(),
                total: n,
            })
    }
}

/// One propagator slot in a [`Propagator`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Problem(usize),
    Lex(usize),
}

/// Queue discipline for fixpoint propagation. GAC closure is confluent, so
/// the discipline only affects the amount of work, never the result.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QueueOrder {
    #[default]
    Fifo,
    Lifo,
}

/// Fixpoint GAC over a borrowed set of problem and lex constraints.
#[derive(Debug)]
pub struct Propagator<'a> {
    problem: &'a [Constraint],
    lex: &'a [LexLeq],
    slots: Vec<Slot>,
    watches: Vec<Vec<usize>>,
    queue_order: QueueOrder,
}

impl<'a> Propagator<'a> {
    pub fn new(n: usize, problem: &'a [Constraint], lex: &'a [LexLeq]) -> Self {
        let mut slots = Vec::with_capacity(problem.len() + lex.len());
        let mut watches = vec![Vec::new(); n];
        for (i, c) in problem.iter().enumerate() {
            for x in c.scope() {
                watches[x].push(slots.len());
            }
            slots.push(Slot::Problem(i));
        }
        for (i, c) in lex.iter().enumerate() {
            for x in c.variables() {
                watches[x].push(slots.len());
            }
            slots.push(Slot::Lex(i));
        }
        Propagator {
            problem,
            lex,
            slots,
            watches,
            queue_order: QueueOrder::Fifo,
        }
    }

    /// All problem and lex constraints of `csp`.
    pub fn for_csp(csp: &'a Csp) -> Self {
        Propagator::new(csp.n(), &csp.constraints, &csp.lex_constraints)
    }

    pub fn with_queue_order(mut self, queue_order: QueueOrder) -> Self {
        self.queue_order = queue_order;
        self
    }

    /// Runs every propagator, then everything woken, until fixpoint. Returns
    /// the number of propagator executions.
    pub fn propagate_all(&self, doms: &mut Domains) -> Result<u64, Conflict> {
        let (events, ok) = self.run(doms, (0..self.slots.len()).collect());
        if ok {
            Ok(events)
        } else {
            Err(Conflict)
        }
    }

    /// Like [`Self::propagate_all`] but only starts from propagators watching
    /// `changed`.
    pub fn propagate_from(&self, doms: &mut Domains, changed: &[VarId]) -> Result<u64, Conflict> {
        let (events, ok) = self.propagate_from_counted(doms, changed);
        if ok {
            Ok(events)
        } else {
            Err(Conflict)
        }
    }

    /// Propagator executions and whether fixpoint was reached without a
    /// wipeout. Events are counted even when a conflict ends the run.
    pub fn propagate_from_counted(&self, doms: &mut Domains, changed: &[VarId]) -> (u64, bool) {
        let mut seeds = Vec::new();
        for &x in changed {
            seeds.extend_from_slice(&self.watches[x]);
        }
        self.run(doms, seeds)
    }

    fn run(&self, doms: &mut Domains, seeds: Vec<usize>) -> (u64, bool) {
        let mut queued = vec![false; self.slots.len()];
        let mut queue = VecDeque::new();
        for s in seeds {
            if !queued[s] {
                queued[s] = true;
                queue.push_back(s);
            }
        }
        let mut events = 0;
        loop {
            let next = match self.queue_order {
                QueueOrder::Fifo => queue.pop_front(),
                QueueOrder::Lifo => queue.pop_back(),
            };
            let Some(s) = next else { break };
            queued[s] = false;
            events += 1;
            let mark = doms.trail().len();
            let outcome = match self.slots[s] {
                Slot::Problem(i) => self.problem[i].enforce_gac(doms),
                Slot::Lex(i) => lex::propagate_lex_gac(&self.lex[i], doms),
            };
            match outcome {
                Propagation::Conflict => return (events, false),
                Propagation::Unchanged => {}
                Propagation::Revised => {
                    let changed: BTreeSet<VarId> =
                        doms.trail().since(mark).iter().map(|&(x, _)| x).collect();
                    for x in changed {
                        for &w in &self.watches[x] {
                            if w != s && !queued[w] {
                                queued[w] = true;
                                queue.push_back(w);
                            }
                        }
                    }
                }
            }
        }
        (events, true)
    }
}

/// Fixpoint GAC over every constraint of `csp`, lex constraints included.
pub fn propagate_fixpoint(csp: &Csp, doms: &mut Domains) -> Result<u64, Conflict> {
    Propagator::for_csp(csp).propagate_all(doms)
}
