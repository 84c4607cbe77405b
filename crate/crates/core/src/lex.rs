//! Lexleader constraints: construction from permutations, the reduction rule
//! for involutions, LEX membership, and a GAC propagator for one constraint.

use crate::error::{Error, Result};
use crate::model::{Domains, PartialAssignment, Propagation, Value, VarId};
use crate::search::SearchOrder;
use crate::symmetry::Permutation;

/// `[x_{lhs[0]}, …, x_{lhs[k-1]}] ≤lex [x_{rhs[0]}, …, x_{rhs[k-1]}]`.
///
/// Indices may repeat, and a pair may relate a variable to itself. The empty
/// constraint is always satisfied.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct LexLeq {
    pub lhs: Vec<VarId>,
    pub rhs: Vec<VarId>,
}

impl LexLeq {
    pub fn new(lhs: Vec<VarId>, rhs: Vec<VarId>) -> Result<Self> {
        if lhs.len() != rhs.len() {
            return Err(Error::LexLengthMismatch {
                lhs: lhs.len(),
                rhs: rhs.len(),
            });
        }
        Ok(LexLeq { lhs, rhs })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Number of pairs `k`.
    pub fn len(&self) -> usize {
        self.lhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lhs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (VarId, VarId)> + '_ {
        self.lhs.iter().copied().zip(self.rhs.iter().copied())
    }

    /// Distinct variables in order of first occurrence.
    pub fn variables(&self) -> Vec<VarId> {
        let mut out: Vec<VarId> = Vec::with_capacity(2 * self.len());
        for (l, r) in self.pairs() {
            for x in [l, r] {
                if !out.contains(&x) {
                    out.push(x);
                }
            }
        }
        out
    }

    /// Whether some variable occurs more than once among the `2k` positions.
    pub fn has_repeated_variables(&self) -> bool {
        self.variables().len() < 2 * self.len()
    }

    /// LEX membership for the natural variable order.
    pub fn is_in_lex(&self) -> bool {
        self.lhs.len() == self.rhs.len()
            && self.lhs.windows(2).all(|w| w[0] < w[1])
            && self.pairs().all(|(l, r)| l <= r)
    }

    /// LEX membership after relabelling variables by their position in
    /// `order`.
    pub fn is_in_lex_under(&self, order: &SearchOrder) -> bool {
        let pos = order.positions();
        let in_range = |x: VarId| x < pos.len();
        self.lhs.len() == self.rhs.len()
            && self.lhs.iter().chain(&self.rhs).all(|&x| in_range(x))
            && self.lhs.windows(2).all(|w| pos[w[0]] < pos[w[1]])
            && self.pairs().all(|(l, r)| pos[l] <= pos[r])
    }

    /// Lexicographic comparison on a total assignment indexed by variable.
    pub fn is_satisfied(&self, values: &[Value]) -> bool {
        for (l, r) in self.pairs() {
            match values[l].cmp(&values[r]) {
                std::cmp::Ordering::Less => return true,
                std::cmp::Ordering::Greater => return false,
                std::cmp::Ordering::Equal => {}
            }
        }
        true
    }
}

/// Checks `c` on a total assignment over `n` variables.
pub fn lex_satisfied(c: &LexLeq, a: &PartialAssignment, n: usize) -> Result<bool> {
    Ok(c.is_satisfied(&a.to_total(n)?))
}

/// The un-reduced lexleader `[x_{o_1}, …, x_{o_n}] ≤lex [x_{σ(o_1)}, …, x_{σ(o_n)}]`
/// for a search order `o`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneralLexLeader {
    pub lhs: Vec<VarId>,
    pub rhs: Vec<VarId>,
}

impl GeneralLexLeader {
    pub fn into_lex_leq(self) -> LexLeq {
        LexLeq {
            lhs: self.lhs,
            rhs: self.rhs,
        }
    }
}

/// Lexleader for `sigma` under the natural order.
pub fn lexleader_from_perm(sigma: &Permutation) -> GeneralLexLeader {
    lexleader_under_order(sigma, &SearchOrder::identity(sigma.len()))
}

pub fn lexleader_under_order(sigma: &Permutation, order: &SearchOrder) -> GeneralLexLeader {
    let lhs = order.as_slice().to_vec();
    let rhs = lhs.iter().map(|&x| sigma.apply(x)).collect();
    GeneralLexLeader { lhs, rhs }
}

/// Reduced lexleader of an involution under the natural order: fixed points
/// are dropped, and of the two pairs a swap `(a b)` produces only the first
/// is kept.
pub fn reduce_disjoint_transpositions(sigma: &Permutation) -> Result<LexLeq> {
    reduce_under_order(sigma, &SearchOrder::identity(sigma.len()))
}

pub fn reduce_under_order(sigma: &Permutation, order: &SearchOrder) -> Result<LexLeq> {
    if !sigma.is_involution() {
        return Err(Error::NotInvolution);
    }
    let pos = order.positions();
    let mut out = LexLeq::empty();
    for (p, &x) in order.as_slice().iter().enumerate() {
        let y = sigma.apply(x);
        if pos[y] > p {
            out.lhs.push(x);
            out.rhs.push(y);
        }
    }
    Ok(out)
}

/// Makes `c` GAC over `doms`, repeating until no value is removed.
///
/// Constraints whose `2k` positions hold pairwise distinct variables use a
/// linear prefix/suffix scan. Anything with shared variables goes through an
/// exact per-value satisfiability test that tracks the equalities a tied
/// prefix forces.
pub fn propagate_lex_gac(c: &LexLeq, doms: &mut Domains) -> Propagation {
    let distinct = !c.has_repeated_variables();
    let mut changed = false;
    loop {
        let step = if distinct {
            filter_distinct(c, doms)
        } else {
            filter_shared(c, doms)
        };
        match step {
            Propagation::Conflict => return Propagation::Conflict,
            Propagation::Unchanged => return Propagation::from_change(changed),
            Propagation::Revised => changed = true,
        }
    }
}

fn filter_distinct(c: &LexLeq, doms: &mut Domains) -> Propagation {
    let k = c.len();
    let (lhs, rhs) = (&c.lhs, &c.rhs);
    let mut can_tie = Vec::with_capacity(k);
    let mut can_lt = Vec::with_capacity(k);
    for j in 0..k {
        let (dx, dy) = (doms.get(lhs[j]), doms.get(rhs[j]));
        can_tie.push(dx.values().any(|v| dy.contains(v)));
        can_lt.push(match (dx.min(), dy.max()) {
            (Some(a), Some(b)) => a < b,
            _ => false,
        });
    }
    // tie_prefix[j]: positions 0..j can all be made equal
    let mut tie_prefix = vec![true; k + 1];
    // lt_before[j]: a strict decision is possible at some position before j
    let mut lt_before = vec![false; k + 1];
    for j in 0..k {
        tie_prefix[j + 1] = tie_prefix[j] && can_tie[j];
        lt_before[j + 1] = lt_before[j] || (tie_prefix[j] && can_lt[j]);
    }
    // suffix_ok[j]: positions j.. can be completed to ≤lex
    let mut suffix_ok = vec![true; k + 1];
    for j in (0..k).rev() {
        suffix_ok[j] = can_lt[j] || (can_tie[j] && suffix_ok[j + 1]);
    }
    if !suffix_ok[0] {
        return Propagation::Conflict;
    }

    let mut changed = false;
    for j in 0..k {
        if lt_before[j] {
            continue;
        }
        let (x, y) = (lhs[j], rhs[j]);
        let (Some(min_x), Some(max_y)) = (doms.get(x).min(), doms.get(y).max()) else {
            return Propagation::Conflict;
        };
        if !tie_prefix[j] {
            // unreachable when suffix_ok[0] holds, kept for completeness
            return Propagation::Conflict;
        }
        let rest = suffix_ok[j + 1];
        let dy = doms.get(y).clone();
        changed |= doms.retain(x, |a| a < max_y || (rest && dy.contains(a)));
        let dx = doms.get(x).clone();
        changed |= doms.retain(y, |b| min_x < b || (rest && dx.contains(b)));
        if doms.get(x).is_empty() || doms.get(y).is_empty() {
            return Propagation::Conflict;
        }
    }
    Propagation::from_change(changed)
}

fn filter_shared(c: &LexLeq, doms: &mut Domains) -> Propagation {
    let vars = c.variables();
    let local = |x: VarId| vars.iter().position(|&v| v == x).expect("variable of c");
    let pairs: Vec<(usize, usize)> = c.pairs().map(|(l, r)| (local(l), local(r))).collect();
    let base: Vec<Vec<Value>> = vars.iter().map(|&x| doms.get(x).values().collect()).collect();

    if !feasible(&pairs, &base, None) {
        return Propagation::Conflict;
    }
    let mut doomed = Vec::new();
    for (u, &x) in vars.iter().enumerate() {
        for &a in &base[u] {
            if !feasible(&pairs, &base, Some((u, a))) {
                doomed.push((x, a));
            }
        }
    }
    for &(x, a) in &doomed {
        doms.remove(x, a);
    }
    Propagation::from_change(!doomed.is_empty())
}

/// Whether some assignment from `base` (with `fix` forcing one variable)
/// satisfies the constraint described by `pairs` over local variable ids.
///
/// The constraint holds iff for some `j` the first `j` pairs are equal and
/// pair `j` is strict (or `j = k`). Equal pairs merge variables into classes
/// whose domains intersect; the strict pair needs two distinct classes with
/// `min(left) < max(right)`.
fn feasible(pairs: &[(usize, usize)], base: &[Vec<Value>], fix: Option<(usize, Value)>) -> bool {
    let mut parent: Vec<usize> = (0..base.len()).collect();
    let mut dom: Vec<Vec<Value>> = base.to_vec();
    if let Some((u, a)) = fix {
        dom[u] = vec![a];
    }
    fn find(parent: &mut [usize], mut u: usize) -> usize {
        while parent[u] != u {
            parent[u] = parent[parent[u]];
            u = parent[u];
        }
        u
    }
    for &(l, r) in pairs {
        let a = find(&mut parent, l);
        let b = find(&mut parent, r);
        if a == b {
            continue;
        }
        if dom[a][0] < *dom[b].last().expect("non-empty class") {
            return true;
        }
        let merged: Vec<Value> = dom[a]
            .iter()
            .copied()
            .filter(|v| dom[b].binary_search(v).is_ok())
            .collect();
        if merged.is_empty() {
            return false;
        }
        parent[b] = a;
        dom[a] = merged;
    }
    true
}
