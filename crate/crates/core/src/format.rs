//! Line-oriented instance files.
//!
//! ```text
//! # comment
//! csp NAME
//! vars N
//! dom I MIN MAX
//! ext K I1 .. IK ; T11 .. T1K ; T21 .. T2K ; ...
//! neq I J
//! alldiff I1 .. IK
//! sym IMG1 .. IMGN
//! lex K L1 .. LK <= R1 .. RK
//! order I1 .. IN
//! ```
//!
//! Indices are 1-based. `vars` must precede every other directive except
//! `csp`, and `alldiff` expands to the pairwise `neq` clique.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lex::LexLeq;
use crate::model::{Constraint, Csp, Domain, Value, VarId};
use crate::search::SearchOrder;
use crate::symmetry::Permutation;

/// A parsed instance plus the source line of each `sym` and `lex` directive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub csp: Csp,
    pub sym_lines: Vec<usize>,
    pub lex_lines: Vec<usize>,
}

fn err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

struct Line<'t> {
    no: usize,
    tokens: Vec<&'t str>,
}

impl Line<'_> {
    fn int(&self, tok: &str) -> Result<Value> {
        tok.parse()
            .map_err(|_| err(self.no, format!("expected an integer, found `{tok}`")))
    }

    fn count(&self, tok: &str) -> Result<usize> {
        tok.parse()
            .map_err(|_| err(self.no, format!("expected a count, found `{tok}`")))
    }

    fn index(&self, tok: &str) -> Result<VarId> {
        match self.count(tok)? {
            0 => Err(err(self.no, "variable indices are 1-based")),
            i => Ok(i - 1),
        }
    }

    fn indices(&self, toks: &[&str]) -> Result<Vec<VarId>> {
        toks.iter().map(|t| self.index(t)).collect()
    }

    fn arity(&self, want: usize) -> Result<()> {
        if self.tokens.len() - 1 != want {
            return Err(err(
                self.no,
                format!("`{}` takes {want} arguments, found {}", self.tokens[0], self.tokens.len() - 1),
            ));
        }
        Ok(())
    }
}

fn tokenize(raw: &str) -> Vec<&str> {
    let body = raw.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    for word in body.split_whitespace() {
        // `;` may be glued to its neighbours
        let mut rest = word;
        while let Some(i) = rest.find(';') {
            if i > 0 {
                out.push(&rest[..i]);
            }
            out.push(";");
            rest = &rest[i + 1..];
        }
        if !rest.is_empty() {
            out.push(rest);
        }
    }
    out
}

/// Parses and validates an instance.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut name = String::from("unnamed");
    let mut n: Option<(usize, usize)> = None;
    let mut domains: Vec<Option<Domain>> = Vec::new();
    let mut constraints = Vec::new();
    let mut symmetries = Vec::new();
    let mut lex_constraints = Vec::new();
    let mut sym_lines = Vec::new();
    let mut lex_lines = Vec::new();
    let mut order = None;

    for (i, raw) in text.lines().enumerate() {
        let line = Line {
            no: i + 1,
            tokens: tokenize(raw),
        };
        let Some(&head) = line.tokens.first() else { continue };
        let args = &line.tokens[1..];
        if head == "csp" {
            if args.is_empty() {
                return Err(err(line.no, "`csp` needs a name"));
            }
            name = args.join(" ");
            continue;
        }
        if head == "vars" {
            if n.is_some() {
                return Err(err(line.no, "`vars` appears more than once"));
            }
            line.arity(1)?;
            let count = line.count(args[0])?;
            n = Some((count, line.no));
            domains = vec![None; count];
            continue;
        }
        let Some((nv, _)) = n else {
            return Err(err(line.no, format!("`{head}` before `vars`")));
        };
        match head {
            "dom" => {
                line.arity(3)?;
                let x = line.index(args[0])?;
                if x >= nv {
                    return Err(err(line.no, format!("variable {} out of range", x + 1)));
                }
                if domains[x].is_some() {
                    return Err(err(line.no, format!("second domain for variable {}", x + 1)));
                }
                domains[x] = Some(Domain::interval(line.int(args[1])?, line.int(args[2])?));
            }
            "ext" => {
                let groups: Vec<&[&str]> = args.split(|t| *t == ";").collect();
                let header = groups[0];
                let Some((&k, scope)) = header.split_first() else {
                    return Err(err(line.no, "`ext` needs an arity"));
                };
                let k = line.count(k)?;
                if scope.len() != k {
                    return Err(err(line.no, format!("`ext` declares arity {k} but lists {} variables", scope.len())));
                }
                let scope = line.indices(scope)?;
                let mut tuples = Vec::new();
                for group in &groups[1..] {
                    if group.is_empty() {
                        continue;
                    }
                    tuples.push(group.iter().map(|t| line.int(t)).collect::<Result<Vec<_>>>()?);
                }
                constraints.push(Constraint::Extensional { scope, tuples });
            }
            "neq" => {
                line.arity(2)?;
                constraints.push(Constraint::NotEqual(line.index(args[0])?, line.index(args[1])?));
            }
            "alldiff" => {
                let vars = line.indices(args)?;
                for (p, &a) in vars.iter().enumerate() {
                    for &b in &vars[p + 1..] {
                        constraints.push(Constraint::NotEqual(a, b));
                    }
                }
            }
            "sym" => {
                if args.len() != nv {
                    return Err(err(line.no, format!("`sym` needs {nv} images, found {}", args.len())));
                }
                let image = line.indices(args)?;
                let p = Permutation::new(image).map_err(|e| err(line.no, e.to_string()))?;
                symmetries.push(p);
                sym_lines.push(line.no);
            }
            "lex" => {
                let Some((&k, rest)) = args.split_first() else {
                    return Err(err(line.no, "`lex` needs a pair count"));
                };
                let k = line.count(k)?;
                if rest.len() != 2 * k + 1 || rest[k] != "<=" {
                    return Err(err(line.no, format!("`lex {k}` expects {k} indices, `<=`, {k} indices")));
                }
                let lhs = line.indices(&rest[..k])?;
                let rhs = line.indices(&rest[k + 1..])?;
                lex_constraints.push(LexLeq { lhs, rhs });
                lex_lines.push(line.no);
            }
            "order" => {
                if order.is_some() {
                    return Err(err(line.no, "`order` appears more than once"));
                }
                let o = line.indices(args)?;
                if o.len() != nv {
                    return Err(err(line.no, format!("`order` needs {nv} indices, found {}", o.len())));
                }
                order = Some(SearchOrder::new(o).map_err(|e| err(line.no, e.to_string()))?);
            }
            other => return Err(err(line.no, format!("unknown directive `{other}`"))),
        }
    }

    let Some((nv, vars_line)) = n else {
        return Err(err(text.lines().count().max(1), "missing `vars`"));
    };
    let domains = domains
        .into_iter()
        .enumerate()
        .map(|(x, d)| d.ok_or_else(|| err(vars_line, format!("variable {} has no `dom` line", x + 1))))
        .collect::<Result<Vec<_>>>()?;
    let csp = Csp {
        name,
        domains,
        constraints,
        symmetries,
        lex_constraints,
        order: order.unwrap_or_else(|| SearchOrder::identity(nv)),
    };
    csp.validate().map_err(Error::Invalid)?;
    Ok(Instance {
        csp,
        sym_lines,
        lex_lines,
    })
}

fn join(xs: impl IntoIterator<Item = impl ToString>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn one_based(xs: &[VarId]) -> String {
    join(xs.iter().map(|x| x + 1))
}

/// One `lex` directive.
pub fn format_lex(c: &LexLeq) -> String {
    let mut s = format!("lex {}", c.len());
    for part in [one_based(&c.lhs), "<=".into(), one_based(&c.rhs)] {
        if !part.is_empty() {
            s.push(' ');
            s.push_str(&part);
        }
    }
    s
}

/// Renders `csp` in the instance syntax. Domains with holes and unary
/// constraints are written as arity-1 `ext` lines.
pub fn print_instance(csp: &Csp) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "csp {}", csp.name);
    let _ = writeln!(out, "vars {}", csp.n());
    let mut unary = Vec::new();
    for (x, d) in csp.domains.iter().enumerate() {
        let (lo, hi) = (d.initial_min(), d.initial_max());
        let _ = writeln!(out, "dom {} {lo} {hi}", x + 1);
        if !d.is_interval() || d.min() != Some(lo) || d.max() != Some(hi) {
            unary.push((x, d.values().collect::<Vec<_>>()));
        }
    }
    for (x, vals) in unary {
        let _ = writeln!(out, "ext 1 {} ; {}", x + 1, vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ; "));
    }
    for c in &csp.constraints {
        match c {
            Constraint::Extensional { scope, tuples } => {
                let _ = write!(out, "ext {} {}", scope.len(), one_based(scope));
                for t in tuples {
                    let _ = write!(out, " ; {}", join(t));
                }
                out.push('\n');
            }
            Constraint::NotEqual(a, b) => {
                let _ = writeln!(out, "neq {} {}", a + 1, b + 1);
            }
            Constraint::UnaryIn { var, values } => {
                let _ = write!(out, "ext 1 {}", var + 1);
                for v in values {
                    let _ = write!(out, " ; {v}");
                }
                out.push('\n');
            }
        }
    }
    for s in &csp.symmetries {
        let _ = writeln!(out, "sym {}", one_based(s.image()));
    }
    for c in &csp.lex_constraints {
        let _ = writeln!(out, "{}", format_lex(c));
    }
    if !csp.order.is_identity() {
        let _ = writeln!(out, "order {}", one_based(csp.order.as_slice()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_neq_instance() {
        let inst = parse_instance("vars 2\ndom 1 0 1\ndom 2 0 1\nneq 1 2\n").unwrap();
        assert_eq!(inst.csp.n(), 2);
        assert_eq!(inst.csp.constraints, vec![Constraint::NotEqual(0, 1)]);
    }

    #[test]
    fn alldiff_expands_to_clique() {
        let inst = parse_instance("vars 3\ndom 1 1 3\ndom 2 1 3\ndom 3 1 3\nalldiff 1 2 3\n").unwrap();
        assert_eq!(
            inst.csp.constraints,
            vec![Constraint::NotEqual(0, 1), Constraint::NotEqual(0, 2), Constraint::NotEqual(1, 2)]
        );
    }

    #[test]
    fn sym_and_lex_lines() {
        let text = "csp t\nvars 3\n# domains\ndom 1 0 1\ndom 2 0 1\ndom 3 0 1\nsym 2 1 3\nlex 1 1 <= 2\nlex 0 <=\n";
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.csp.symmetries[0].image(), &[1, 0, 2]);
        assert_eq!(inst.csp.lex_constraints[0], LexLeq::new(vec![0], vec![1]).unwrap());
        assert!(inst.csp.lex_constraints[1].is_empty());
        assert_eq!(inst.sym_lines, vec![7]);
        assert_eq!(inst.lex_lines, vec![8, 9]);
    }

    #[test]
    fn ext_with_glued_separators() {
        let inst = parse_instance("vars 2\ndom 1 0 1\ndom 2 0 1\next 2 1 2; 0 1;1 0 ;\n").unwrap();
        assert_eq!(
            inst.csp.constraints[0],
            Constraint::Extensional {
                scope: vec![0, 1],
                tuples: vec![vec![0, 1], vec![1, 0]]
            }
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_instance("vars 2\ndom 1 0 1\ndom 2 0 x\n").unwrap_err();
        assert_eq!(e, err(3, "expected an integer, found `x`"));
        let e = parse_instance("dom 1 0 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_instance("vars 1\nvars 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = parse_instance("vars 2\ndom 1 0 1\n").unwrap_err();
        assert!(e.to_string().contains("no `dom` line"));
        let e = parse_instance("vars 2\ndom 1 0 1\ndom 2 0 1\nsym 1 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn semantic_errors_come_from_validation() {
        let e = parse_instance("vars 1\ndom 1 1 0\n").unwrap_err();
        assert!(matches!(e, Error::Invalid(_)));
        let e = parse_instance("vars 2\ndom 1 0 1\ndom 2 0 1\next 2 1 2 ; 0 1 1\n").unwrap_err();
        assert!(e.to_string().contains("arity mismatch"));
        let e = parse_instance("vars 2\ndom 1 0 1\ndom 2 0 1\nneq 1 9\n").unwrap_err();
        assert!(e.to_string().contains("scope out of range"));
    }

    #[test]
    fn lex_formatting() {
        assert_eq!(format_lex(&LexLeq::new(vec![0], vec![1]).unwrap()), "lex 1 1 <= 2");
        assert_eq!(format_lex(&LexLeq::empty()), "lex 0 <=");
        assert_eq!(format_lex(&LexLeq::new(vec![0, 1], vec![2, 3]).unwrap()), "lex 2 1 2 <= 3 4");
    }

    fn arb_csp() -> impl Strategy<Value = Csp> {
        (1usize..=5).prop_flat_map(|n| {
            let doms = proptest::collection::vec((-2i64..2, 0i64..3), n);
            let neqs = proptest::collection::vec((0..n, 0..n), 0..4);
            let lexes = proptest::collection::vec(proptest::collection::vec((0..n, 0..n), 0..4), 0..3);
            let order = Just((0..n).collect::<Vec<_>>()).prop_shuffle();
            let sym = Just((0..n).collect::<Vec<_>>()).prop_shuffle();
            let tuple_seeds = proptest::collection::btree_set(0u32..64, 0..5);
            (doms, neqs, lexes, order, sym, tuple_seeds).prop_map(move |(doms, neqs, lexes, order, sym, seeds)| {
                let domains: Vec<Domain> = doms.iter().map(|&(lo, w)| Domain::interval(lo, lo + w)).collect();
                let mut csp = Csp::new("round trip", domains.clone());
                for (a, b) in neqs {
                    if a != b {
                        csp.constraints.push(Constraint::NotEqual(a, b));
                    }
                }
                let scope: Vec<VarId> = (0..n.min(2)).collect();
                let tuples: Vec<Vec<Value>> = seeds
                    .iter()
                    .map(|&s| {
                        scope
                            .iter()
                            .enumerate()
                            .map(|(p, &x)| domains[x].initial_min() + ((s >> (3 * p)) as i64 % (domains[x].size() as i64)))
                            .collect()
                    })
                    .collect::<std::collections::BTreeSet<_>>()
                    .into_iter()
                    .collect();
                csp.constraints.push(Constraint::Extensional { scope, tuples });
                for pairs in lexes {
                    let (lhs, rhs) = pairs.into_iter().unzip();
                    csp.lex_constraints.push(LexLeq { lhs, rhs });
                }
                csp.symmetries.push(Permutation::new(sym).unwrap());
                csp.order = SearchOrder::new(order).unwrap();
                csp
            })
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(csp in arb_csp()) {
            let text = print_instance(&csp);
            let back = parse_instance(&text).unwrap().csp;
            prop_assert_eq!(&back, &csp);
            prop_assert_eq!(print_instance(&back), text);
        }
    }
}
