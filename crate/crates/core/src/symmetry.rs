//! Variable permutations, symmetry verification on the microstructure
//! complement, group closure and solution orbits.

use std::collections::{BTreeSet, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::model::{Constraint, Csp, Value, VarId};

/// A bijection on `0..n`, stored as its image sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    image: Vec<VarId>,
}

impl Permutation {
    pub fn new(image: Vec<VarId>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &i in &image {
            if i >= n {
                return Err(Error::NotBijection {
                    len: n,
                    detail: format!("image {} out of range", i + 1),
                });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::NotBijection {
                    len: n,
                    detail: format!("image {} repeated", i + 1),
                });
            }
        }
        Ok(Permutation { image })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            image: (0..n).collect(),
        }
    }

    pub fn transposition(n: usize, a: VarId, b: VarId) -> Self {
        let mut p = Permutation::identity(n);
        p.image.swap(a, b);
        p
    }

    /// Product of the given disjoint or overlapping cycles, applied right to
    /// left.
    pub fn from_cycles(n: usize, cycles: &[&[VarId]]) -> Result<Self> {
        let mut p = Permutation::identity(n);
        for cycle in cycles.iter().rev() {
            let mut c = Permutation::identity(n);
            for (i, &x) in cycle.iter().enumerate() {
                let y = cycle[(i + 1) % cycle.len()];
                if x >= n || y >= n {
                    return Err(Error::NotBijection {
                        len: n,
                        detail: format!("cycle element {} out of range", x.max(y) + 1),
                    });
                }
                c.image[x] = y;
            }
            let c = Permutation::new(c.image)?;
            p = c.compose(&p);
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn image(&self) -> &[VarId] {
        &self.image
    }

    pub fn apply(&self, i: VarId) -> VarId {
        self.image[i]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.image.iter().enumerate() {
            inv[j] = i;
        }
        Permutation { image: inv }
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Self {
        Permutation {
            image: other.image.iter().map(|&j| self.image[j]).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn is_involution(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &j)| self.image[j] == i)
    }
}

/// Image solution `s'` with `s'(x_{σ(i)}) = s(x_i)`.
pub fn apply_symmetry(sigma: &Permutation, s: &[Value]) -> Vec<Value> {
    let mut out = vec![0; s.len()];
    for (i, &v) in s.iter().enumerate() {
        out[sigma.apply(i)] = v;
    }
    out
}

pub type Literal = (VarId, Value);

/// Microstructure complement over the initial domains: nodes are literals,
/// hyperedges are same-variable pairs and forbidden tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Msc {
    pub nodes: Vec<Literal>,
    /// Each edge is a sorted literal list.
    pub edges: BTreeSet<Vec<Literal>>,
}

/// Builds the MSC of the problem constraints of `csp`. Lex constraints are
/// symmetry-breaking additions and take no part in it.
///
/// `cap` bounds the node count and the tuples examined per constraint.
pub fn build_msc(csp: &Csp, cap: u64) -> Result<Msc> {
    let nodes: Vec<Literal> = csp
        .domains
        .iter()
        .enumerate()
        .flat_map(|(x, d)| d.values().map(move |v| (x, v)))
        .collect();
    if nodes.len() as u64 > cap {
        return Err(Error::CapExceeded {
            what: "microstructure node count",
            cap,
        });
    }
    let mut edges = BTreeSet::new();
    for (x, d) in csp.domains.iter().enumerate() {
        let vals: Vec<Value> = d.values().collect();
        for (i, &a) in vals.iter().enumerate() {
            for &b in &vals[i + 1..] {
                edges.insert(vec![(x, a), (x, b)]);
            }
        }
    }
    for c in &csp.constraints {
        let scope = c.scope();
        let space: u64 = scope
            .iter()
            .map(|&x| csp.domains[x].size() as u64)
            .try_fold(1u64, |acc, s| acc.checked_mul(s))
            .unwrap_or(u64::MAX);
        if space > cap {
            return Err(Error::CapExceeded {
                what: "constraint tuple space",
                cap,
            });
        }
        for_each_tuple(csp, &scope, |tuple| {
            if !constraint_allows_tuple(c, tuple) {
                let mut edge: Vec<Literal> = scope.iter().copied().zip(tuple.iter().copied()).collect();
                edge.sort();
                edges.insert(edge);
            }
        });
    }
    Ok(Msc { nodes, edges })
}

fn constraint_allows_tuple(c: &Constraint, tuple: &[Value]) -> bool {
    match c {
        Constraint::Extensional { tuples, .. } => tuples.iter().any(|t| t == tuple),
        Constraint::NotEqual(..) => tuple[0] != tuple[1],
        Constraint::UnaryIn { values, .. } => values.contains(&tuple[0]),
    }
}

fn for_each_tuple(csp: &Csp, scope: &[VarId], mut f: impl FnMut(&[Value])) {
    let doms: Vec<Vec<Value>> = scope.iter().map(|&x| csp.domains[x].values().collect()).collect();
    if doms.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0usize; scope.len()];
    let mut tuple: Vec<Value> = doms.iter().map(|d| d[0]).collect();
    loop {
        f(&tuple);
        let mut i = scope.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < doms[i].len() {
                tuple[i] = doms[i][idx[i]];
                break;
            }
            idx[i] = 0;
            tuple[i] = doms[i][0];
        }
    }
}

/// Whether `(x_i, d) ↦ (x_{σ(i)}, d)` is an automorphism of the MSC of `csp`.
pub fn verify_variable_symmetry(csp: &Csp, sigma: &Permutation, cap: u64) -> Result<bool> {
    for i in 0..sigma.len() {
        let j = sigma.apply(i);
        if csp.domains[i] != csp.domains[j] {
            return Err(Error::DomainMismatch { a: i, b: j });
        }
    }
    let msc = build_msc(csp, cap)?;
    Ok(msc_automorphism(&msc, sigma))
}

/// Checks the literal map against an already built MSC.
pub fn msc_automorphism(msc: &Msc, sigma: &Permutation) -> bool {
    msc.edges.iter().all(|e| {
        let mut image: Vec<Literal> = e.iter().map(|&(x, d)| (sigma.apply(x), d)).collect();
        image.sort();
        msc.edges.contains(&image)
    })
}

/// Closure of `generators` under composition, breadth first. Fails once more
/// than `cap` elements are found.
pub fn generate_group(n: usize, generators: &[Permutation], cap: u64) -> Result<Vec<Permutation>> {
    let identity = Permutation::identity(n);
    let mut seen: HashSet<Permutation> = HashSet::from([identity.clone()]);
    let mut queue = VecDeque::from([identity]);
    while let Some(g) = queue.pop_front() {
        for s in generators {
            let h = s.compose(&g);
            if !seen.contains(&h) {
                if seen.len() as u64 >= cap {
                    return Err(Error::CapExceeded {
                        what: "symmetry group size",
                        cap,
                    });
                }
                seen.insert(h.clone());
                queue.push_back(h);
            }
        }
    }
    let mut group: Vec<Permutation> = seen.into_iter().collect();
    group.sort();
    Ok(group)
}

/// Partitions `solutions` into orbits of the group generated by
/// `generators`. Orbits appear in order of their first listed member.
pub fn orbits_of_solutions(
    solutions: &[Vec<Value>],
    generators: &[Permutation],
) -> Result<Vec<Vec<Vec<Value>>>> {
    let index: std::collections::HashMap<&[Value], usize> = solutions
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_slice(), i))
        .collect();
    let mut visited = vec![false; solutions.len()];
    let mut orbits = Vec::new();
    for start in 0..solutions.len() {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut orbit = vec![solutions[start].clone()];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for g in generators {
                let image = apply_symmetry(g, &solutions[i]);
                let &j = index.get(image.as_slice()).ok_or(Error::NotClosed)?;
                if !visited[j] {
                    visited[j] = true;
                    orbit.push(solutions[j].clone());
                    queue.push_back(j);
                }
            }
        }
        orbits.push(orbit);
    }
    Ok(orbits)
}
