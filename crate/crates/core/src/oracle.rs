//! Extendability oracles: does a consecutive partial assignment, over the
//! current reduced domains, extend to a solution of the problem constraints?

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::model::{Constraint, Csp, Domain, Domains, PartialAssignment, Propagator, Value, VarId};

/// One extendability question. Assigned variables already have singleton
/// domains in `domains`.
#[derive(Clone, Copy, Debug)]
pub struct OracleQuery<'a> {
    pub csp: &'a Csp,
    pub domains: &'a [Domain],
    pub assignment: &'a PartialAssignment,
}

pub trait Oracle {
    /// True iff some total assignment inside `q.domains` satisfies every
    /// problem constraint of `q.csp`. Lex constraints are ignored.
    fn extends(&mut self, q: &OracleQuery<'_>) -> Result<bool>;

    fn name(&self) -> &'static str;
}

/// Complete backtracking search with GAC over the problem constraints.
/// Worst-case exponential.
#[derive(Clone, Debug, Default)]
pub struct ExactOracle {
    node_budget: Option<u64>,
}

impl ExactOracle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Caps the search nodes of a single query.
    pub fn with_node_budget(budget: u64) -> Self {
        ExactOracle {
            node_budget: Some(budget),
        }
    }
}

impl Oracle for ExactOracle {
    fn extends(&mut self, q: &OracleQuery<'_>) -> Result<bool> {
        if q.domains.iter().any(Domain::is_empty) {
            return Ok(false);
        }
        let propagator = Propagator::new(q.domains.len(), &q.csp.constraints, &[]);
        let mut doms = Domains::new(q.domains.to_vec());
        if propagator.propagate_all(&mut doms).is_err() {
            return Ok(false);
        }
        let mut nodes = 0;
        first_solution(&propagator, &mut doms, &mut nodes, self.node_budget)
    }

    fn name(&self) -> &'static str {
        "exact"
    }
}

fn first_solution(
    propagator: &Propagator<'_>,
    doms: &mut Domains,
    nodes: &mut u64,
    budget: Option<u64>,
) -> Result<bool> {
    // smallest unfixed domain first
    let Some(var) = (0..doms.len())
        .filter(|&x| !doms.get(x).is_singleton())
        .min_by_key(|&x| doms.get(x).size())
    else {
        return Ok(true);
    };
    let candidates: Vec<Value> = doms.get(var).values().collect();
    for v in candidates {
        *nodes += 1;
        if let Some(b) = budget {
            if *nodes > b {
                return Err(Error::OracleBudgetExhausted(b));
            }
        }
        doms.push_marker();
        doms.assign(var, v);
        let ok = propagator.propagate_from(doms, &[var]).is_ok()
            && first_solution(propagator, doms, nodes, budget)?;
        doms.pop_marker();
        if ok {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Polynomial oracle for instances whose only non-unary constraints form one
/// complete `≠` clique: a bipartite matching between the clique variables and
/// their remaining values.
#[derive(Clone, Debug)]
pub struct AlldiffOracle {
    clique: Vec<VarId>,
    unary: HashMap<VarId, BTreeSet<Value>>,
}

impl AlldiffOracle {
    pub fn new(csp: &Csp) -> Result<Self> {
        let mut edges = HashSet::new();
        let mut unary: HashMap<VarId, BTreeSet<Value>> = HashMap::new();
        let mut restrict = |var: VarId, allowed: BTreeSet<Value>| {
            unary
                .entry(var)
                .and_modify(|s| s.retain(|v| allowed.contains(v)))
                .or_insert(allowed);
        };
        for c in &csp.constraints {
            match c {
                Constraint::NotEqual(a, b) => {
                    edges.insert((*a.min(b), *a.max(b)));
                }
                Constraint::UnaryIn { var, values } => restrict(*var, values.clone()),
                Constraint::Extensional { scope, tuples } if scope.len() == 1 => {
                    restrict(scope[0], tuples.iter().map(|t| t[0]).collect())
                }
                Constraint::Extensional { scope, .. } => {
                    return Err(Error::NotAlldiffClique(format!(
                        "extensional constraint of arity {}",
                        scope.len()
                    )))
                }
            }
        }
        let clique: BTreeSet<VarId> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
        let clique: Vec<VarId> = clique.into_iter().collect();
        for (i, &a) in clique.iter().enumerate() {
            for &b in &clique[i + 1..] {
                if !edges.contains(&(a, b)) {
                    return Err(Error::NotAlldiffClique(format!(
                        "missing ≠ between variables {} and {}",
                        a + 1,
                        b + 1
                    )));
                }
            }
        }
        Ok(AlldiffOracle { clique, unary })
    }

    pub fn clique(&self) -> &[VarId] {
        &self.clique
    }

    fn allowed(&self, var: VarId, d: &Domain) -> Vec<Value> {
        match self.unary.get(&var) {
            Some(set) => d.values().filter(|v| set.contains(v)).collect(),
            None => d.values().collect(),
        }
    }
}

impl Oracle for AlldiffOracle {
    fn extends(&mut self, q: &OracleQuery<'_>) -> Result<bool> {
        let allowed: Vec<Vec<Value>> = q
            .domains
            .iter()
            .enumerate()
            .map(|(x, d)| self.allowed(x, d))
            .collect();
        if allowed.iter().any(Vec::is_empty) {
            return Ok(false);
        }
        let adjacency: Vec<&[Value]> = self.clique.iter().map(|&x| allowed[x].as_slice()).collect();
        Ok(perfect_left_matching(&adjacency))
    }

    fn name(&self) -> &'static str {
        "alldiff"
    }
}

/// Whether every left vertex can be matched to a distinct value, by repeated
/// augmenting paths.
fn perfect_left_matching(adjacency: &[&[Value]]) -> bool {
    let mut owner: HashMap<Value, usize> = HashMap::new();
    for left in 0..adjacency.len() {
        let mut visited = HashSet::new();
        if !augment(left, adjacency, &mut owner, &mut visited) {
            return false;
        }
    }
    true
}

fn augment(
    left: usize,
    adjacency: &[&[Value]],
    owner: &mut HashMap<Value, usize>,
    visited: &mut HashSet<Value>,
) -> bool {
    for &v in adjacency[left] {
        if !visited.insert(v) {
            continue;
        }
        let free = match owner.get(&v) {
            None => true,
            Some(&other) => augment(other, adjacency, owner, visited),
        };
        if free {
            owner.insert(v, left);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alldiff(n: usize) -> Csp {
        let mut csp = Csp::uniform("alldiff", n, 1, n as Value);
        csp.add_alldiff(&(0..n).collect::<Vec<_>>());
        csp
    }

    fn ask(oracle: &mut dyn Oracle, csp: &Csp, doms: &[Domain]) -> bool {
        let a = PartialAssignment::new();
        oracle
            .extends(&OracleQuery {
                csp,
                domains: doms,
                assignment: &a,
            })
            .unwrap()
    }

    #[test]
    fn exact_without_constraints() {
        let csp = Csp::uniform("free", 3, 0, 2);
        assert!(ask(&mut ExactOracle::new(), &csp, &csp.domains));
    }

    #[test]
    fn exact_forced_violation() {
        let mut csp = Csp::uniform("neq", 2, 7, 7);
        csp.constraints.push(Constraint::NotEqual(0, 1));
        assert!(!ask(&mut ExactOracle::new(), &csp, &csp.domains));
    }

    #[test]
    fn exact_partial_alldiff() {
        let csp = alldiff(4);
        let mut doms = csp.domains.clone();
        doms[0] = Domain::from_values([2]);
        let mut a = PartialAssignment::new();
        a.assign(0, 2).unwrap();
        let q = OracleQuery {
            csp: &csp,
            domains: &doms,
            assignment: &a,
        };
        assert!(ExactOracle::new().extends(&q).unwrap());
        assert!(csp.satisfies(&[2, 1, 3, 4]));
    }

    #[test]
    fn exact_budget() {
        let mut csp = Csp::uniform("pigeons", 6, 1, 5);
        csp.add_alldiff(&(0..6).collect::<Vec<_>>());
        let doms = csp.domains.clone();
        let a = PartialAssignment::new();
        let q = OracleQuery {
            csp: &csp,
            domains: &doms,
            assignment: &a,
        };
        assert_eq!(
            ExactOracle::with_node_budget(3).extends(&q),
            Err(Error::OracleBudgetExhausted(3))
        );
        assert_eq!(ExactOracle::new().extends(&q), Ok(false));
    }

    #[test]
    fn alldiff_identity_matching() {
        let csp = alldiff(3);
        assert!(ask(&mut AlldiffOracle::new(&csp).unwrap(), &csp, &csp.domains));
    }

    #[test]
    fn alldiff_hall_violation() {
        let csp = alldiff(3);
        let doms = vec![Domain::interval(1, 3), Domain::from_values([2]), Domain::from_values([2])];
        assert!(!ask(&mut AlldiffOracle::new(&csp).unwrap(), &csp, &doms));
    }

    #[test]
    fn alldiff_respects_unary() {
        let mut csp = alldiff(2);
        csp.constraints.push(Constraint::UnaryIn {
            var: 0,
            values: [2].into(),
        });
        csp.constraints.push(Constraint::Extensional {
            scope: vec![1],
            tuples: vec![vec![2]],
        });
        assert!(!ask(&mut AlldiffOracle::new(&csp).unwrap(), &csp, &csp.domains));
    }

    #[test]
    fn alldiff_rejects_non_clique() {
        let mut csp = Csp::uniform("path", 3, 1, 3);
        csp.constraints.push(Constraint::NotEqual(0, 1));
        csp.constraints.push(Constraint::NotEqual(1, 2));
        assert!(matches!(AlldiffOracle::new(&csp), Err(Error::NotAlldiffClique(_))));

        let mut csp = Csp::uniform("table", 2, 0, 1);
        csp.constraints.push(Constraint::Extensional {
            scope: vec![0, 1],
            tuples: vec![vec![0, 1]],
        });
        assert!(AlldiffOracle::new(&csp).is_err());
    }
}
