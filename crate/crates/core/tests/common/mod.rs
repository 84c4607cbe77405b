#![allow(dead_code)]

use std::collections::BTreeSet;

use lexenum::model::{Constraint, Csp, Value, VarId};
use lexenum::symmetry::{generate_group, Permutation};
use lexenum::LexLeq;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

/// Every assignment over the initial domains of `csp` accepted by `keep`,
/// in lexicographic order of variable index.
pub fn brute_force(csp: &Csp, keep: impl Fn(&[Value]) -> bool) -> Vec<Vec<Value>> {
    let doms: Vec<Vec<Value>> = csp.domains.iter().map(|d| d.values().collect()).collect();
    let mut out = Vec::new();
    if doms.iter().any(Vec::is_empty) {
        return out;
    }
    let n = doms.len();
    let mut idx = vec![0usize; n];
    loop {
        let s: Vec<Value> = (0..n).map(|x| doms[x][idx[x]]).collect();
        if keep(&s) {
            out.push(s);
        }
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < doms[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
}

pub fn alldiff(n: usize) -> Csp {
    let mut csp = Csp::uniform(format!("alldiff-{n}"), n, 1, n as Value);
    csp.add_alldiff(&(0..n).collect::<Vec<_>>());
    csp
}

pub fn adjacent_transpositions(n: usize) -> Vec<Permutation> {
    (0..n.saturating_sub(1))
        .map(|i| Permutation::transposition(n, i, i + 1))
        .collect()
}

/// A random LEX family under the natural order: strictly increasing left
/// indices, each right index at or after its left partner.
pub fn random_lex_family(rng: &mut StdRng, n: usize, constraints: usize) -> Vec<LexLeq> {
    (0..constraints)
        .map(|_| {
            let k = rng.gen_range(0..=n);
            let mut lhs: Vec<VarId> = (0..n).collect::<Vec<_>>().choose_multiple(rng, k).copied().collect();
            lhs.sort();
            let rhs = lhs.iter().map(|&l| rng.gen_range(l..n)).collect();
            LexLeq { lhs, rhs }
        })
        .collect()
}

/// A random involution made of disjoint transpositions (at least one).
pub fn random_involution(rng: &mut StdRng, n: usize) -> Permutation {
    let mut vars: Vec<VarId> = (0..n).collect();
    vars.shuffle(rng);
    let swaps = rng.gen_range(1..=n / 2);
    let mut image: Vec<VarId> = (0..n).collect();
    for pair in vars.chunks(2).take(swaps) {
        if let [a, b] = *pair {
            image[a] = b;
            image[b] = a;
        }
    }
    Permutation::new(image).unwrap()
}

/// Adds the image of every constraint under every element of the group, so
/// each generator becomes a variable symmetry of `csp`.
pub fn symmetrize(csp: &mut Csp, generators: &[Permutation]) {
    let group = generate_group(csp.n(), generators, 10_000).unwrap();
    let mut seen: BTreeSet<(Vec<VarId>, Vec<Vec<Value>>)> = BTreeSet::new();
    let mut out = Vec::new();
    for c in &csp.constraints {
        let Constraint::Extensional { scope, tuples } = c else {
            out.push(c.clone());
            continue;
        };
        for g in &group {
            let image: Vec<VarId> = scope.iter().map(|&x| g.apply(x)).collect();
            if seen.insert((image.clone(), tuples.clone())) {
                out.push(Constraint::Extensional {
                    scope: image,
                    tuples: tuples.clone(),
                });
            }
        }
    }
    csp.constraints = out;
}

/// Random table on `arity` distinct variables keeping each tuple with
/// probability `density`.
pub fn random_table(rng: &mut StdRng, n: usize, d: usize, arity: usize, density: f64) -> Constraint {
    let mut scope: Vec<VarId> = (0..n).collect::<Vec<_>>().choose_multiple(rng, arity).copied().collect();
    scope.sort();
    let mut tuples = Vec::new();
    for code in 0..d.pow(arity as u32) {
        if rng.gen_bool(density) {
            let mut c = code;
            let t: Vec<Value> = (0..arity)
                .map(|_| {
                    let v = (c % d) as Value;
                    c /= d;
                    v
                })
                .collect();
            tuples.push(t);
        }
    }
    Constraint::Extensional { scope, tuples }
}

/// A random small CSP with involution symmetries it provably has.
pub struct SymmetricInstance {
    pub csp: Csp,
    pub symmetries: Vec<Permutation>,
    pub alldiff: bool,
}

pub fn random_symmetric_instance(rng: &mut StdRng, max_n: usize) -> SymmetricInstance {
    let n = rng.gen_range(2..=max_n);
    let syms: Vec<Permutation> = (0..rng.gen_range(1..=3)).map(|_| random_involution(rng, n)).collect();
    if rng.gen_bool(0.3) {
        let d = rng.gen_range(n.saturating_sub(1).max(1)..=n + 1);
        let mut csp = Csp::uniform("random-alldiff", n, 1, d as Value);
        csp.add_alldiff(&(0..n).collect::<Vec<_>>());
        return SymmetricInstance {
            csp,
            symmetries: syms,
            alldiff: true,
        };
    }
    let d = rng.gen_range(2..=3usize);
    let mut csp = Csp::uniform("random-table", n, 0, d as Value - 1);
    for _ in 0..rng.gen_range(1..=2) {
        let arity = rng.gen_range(2..=n.min(3));
        let density = rng.gen_range(0.4..0.9);
        csp.constraints.push(random_table(rng, n, d, arity, density));
    }
    symmetrize(&mut csp, &syms);
    SymmetricInstance {
        csp,
        symmetries: syms,
        alldiff: false,
    }
}

/// Prints a uniform verdict line and fails the test on a miss.
pub fn verdict(criterion: &str, ok: bool, detail: &str) {
    println!("[{}] {criterion}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{criterion} failed: {detail}");
}
