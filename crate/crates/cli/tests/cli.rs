use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

fn instance(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn run(args: &[&str], file: &NamedTempFile) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexenum"))
        .args(args)
        .arg(file.path())
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn alldiff_file(n: usize, with_syms: bool) -> NamedTempFile {
    let mut text = format!("csp alldiff-{n}\nvars {n}\n");
    for i in 1..=n {
        text += &format!("dom {i} 1 {n}\n");
    }
    let vars: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    text += &format!("alldiff {}\n", vars.join(" "));
    if with_syms {
        for i in 1..n {
            let mut image: Vec<usize> = (1..=n).collect();
            image.swap(i - 1, i);
            let image: Vec<String> = image.iter().map(ToString::to_string).collect();
            text += &format!("sym {}\n", image.join(" "));
        }
    }
    instance(&text)
}

const LEX_PAIR: &str = "\
csp lex-pair
vars 6
dom 1 0 1
dom 2 0 1
dom 3 0 1
dom 4 0 1
dom 5 0 1
dom 6 0 1
lex 2 1 5 <= 2 6
lex 3 1 2 3 <= 5 6 4
";

/// Every point of {0,1}^6 satisfying both lex constraints, in ascending order.
fn lex_pair_brute_force() -> Vec<[u8; 6]> {
    let leq = |a: &[u8], b: &[u8]| a <= b;
    (0u32..64)
        .map(|code| {
            let mut x = [0u8; 6];
            for (i, v) in x.iter_mut().enumerate() {
                *v = (code >> (5 - i) & 1) as u8;
            }
            x
        })
        .filter(|x| leq(&[x[0], x[4]], &[x[1], x[5]]) && leq(&[x[0], x[1], x[2]], &[x[4], x[5], x[3]]))
        .collect()
}

fn render(rows: &[[u8; 6]]) -> String {
    rows.iter()
        .map(|r| r.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ") + "\n")
        .collect()
}

#[test]
fn enumerate_lex_pair_matches_brute_force() {
    let f = instance(LEX_PAIR);
    let o = run(&["enumerate"], &f);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), render(&lex_pair_brute_force()));
}

#[test]
fn enumerate_prints_in_search_order_sequence() {
    let f = instance(LEX_PAIR);
    let o = run(&["enumerate", "--order", "1,2,3,4,6,5"], &f);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut expected: Vec<[u8; 6]> = lex_pair_brute_force()
        .into_iter()
        .map(|x| [x[0], x[1], x[2], x[3], x[5], x[4]])
        .collect();
    expected.sort();
    assert_eq!(stdout(&o), render(&expected));
}

#[test]
fn neq_pair() {
    let f = instance("vars 2\ndom 1 0 1\ndom 2 0 1\nneq 1 2\n");
    let o = run(&["enumerate"], &f);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0 1\n1 0\n");
}

#[test]
fn unconstrained_variable() {
    let f = instance("vars 1\ndom 1 0 1\n");
    let o = run(&["enumerate"], &f);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0\n1\n");
}

#[test]
fn zero_solutions_is_success() {
    let f = instance("vars 2\ndom 1 0 0\ndom 2 0 0\nneq 1 2\n");
    let o = run(&["enumerate"], &f);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");
}

#[test]
fn empty_domain_is_input_error() {
    let f = instance("vars 1\ndom 1 1 0\n");
    let o = run(&["enumerate"], &f);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty domain"));
}

#[test]
fn syntax_error_names_line() {
    let f = instance("vars 2\ndom 1 0 1\ndom 2 0 1\nneq 1 x\n");
    let o = run(&["enumerate"], &f);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn node_budget_exhaustion_exits_one() {
    let f = alldiff_file(5, false);
    let o = run(&["enumerate", "--node-budget", "10"], &f);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn alldiff_with_symmetries_prints_one_solution() {
    let f = alldiff_file(4, true);
    let o = run(&["enumerate-sym", "--oracle", "alldiff"], &f);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "1 2 3 4\n");
}

#[test]
fn alldiff_without_symmetries_prints_all_permutations() {
    let f = alldiff_file(4, false);
    let o = run(&["enumerate-sym", "--oracle", "alldiff"], &f);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 24);
    let mut sorted = lines.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted, lines);
}

#[test]
fn exact_and_alldiff_oracles_agree() {
    let f = alldiff_file(5, true);
    let a = run(&["enumerate-sym", "--oracle", "alldiff"], &f);
    let b = run(&["enumerate-sym", "--oracle", "exact"], &f);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn three_cycle_is_rejected_with_line() {
    let f = instance("vars 3\ndom 1 0 1\ndom 2 0 1\ndom 3 0 1\nsym 2 3 1\n");
    let o = run(&["enumerate-sym"], &f);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("not an involution") && err.contains("line 5"), "{err}");
}

#[test]
fn non_symmetry_is_rejected() {
    let f = instance("vars 2\ndom 1 0 1\ndom 2 0 1\next 2 1 2 ; 0 1\nsym 2 1\n");
    let o = run(&["enumerate-sym"], &f);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not a variable symmetry"));
}

#[test]
fn alldiff_oracle_needs_clique() {
    let f = instance("vars 3\ndom 1 0 2\ndom 2 0 2\ndom 3 0 2\nneq 1 2\nneq 2 3\n");
    let o = run(&["enumerate-sym", "--oracle", "alldiff"], &f);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alldifferent"));
}

#[test]
fn enumerate_sym_is_deterministic_and_writes_metrics() {
    let f = instance(
        "vars 4\ndom 1 0 2\ndom 2 0 2\ndom 3 0 2\ndom 4 0 2\nneq 1 2\nneq 3 4\nsym 2 1 3 4\nsym 3 4 1 2\n",
    );
    let metrics = NamedTempFile::new().unwrap();
    let m = metrics.path().to_str().unwrap();
    let a = run(&["enumerate-sym", "--metrics-out", m], &f);
    let csv = std::fs::read_to_string(metrics.path()).unwrap();
    let b = run(&["enumerate-sym"], &f);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);

    let solutions = stdout(&a).lines().count();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("gap_index,nodes,values_rejected,propagations,oracle_calls,wall_ns"));
    let rows: Vec<Vec<u64>> = rows.map(|r| r.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), solutions + 1);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 6);
        assert_eq!(r[0], i as u64);
    }
}

#[test]
fn reduce_examples() {
    let f = instance("vars 3\ndom 1 0 1\ndom 2 0 1\ndom 3 0 1\nsym 2 1 3\nsym 1 2 3\n");
    let o = run(&["reduce"], &f);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "lex 1 1 <= 2\nlex 0 <=\n");

    let f = instance("vars 4\ndom 1 0 1\ndom 2 0 1\ndom 3 0 1\ndom 4 0 1\nsym 3 4 1 2\n");
    assert_eq!(stdout(&run(&["reduce"], &f)), "lex 2 1 2 <= 3 4\n");
}

#[test]
fn reduced_output_round_trips_as_instance_lines() {
    let header = "vars 4\ndom 1 0 1\ndom 2 0 1\ndom 3 0 1\ndom 4 0 1\n";
    let f = instance(&format!("{header}sym 3 4 1 2\nsym 2 1 3 4\n"));
    let reduced = stdout(&run(&["reduce"], &f));
    let g = instance(&format!("{header}{reduced}"));
    let o = run(&["check"], &g);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches(": in LEX").count(), 2);
}

#[test]
fn reduce_rejects_non_involution() {
    let f = instance("vars 3\ndom 1 0 1\ndom 2 0 1\ndom 3 0 1\nsym 2 3 1\n");
    let o = run(&["reduce"], &f);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not an involution"));
}

#[test]
fn orbits_of_alldiff_three() {
    let f = instance("vars 3\ndom 1 1 3\ndom 2 1 3\ndom 3 1 3\nalldiff 1 2 3\nsym 2 1 3\nsym 1 3 2\n");
    let o = run(&["orbits"], &f);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "1 orbit: size 6\n");
}

#[test]
fn orbits_report_sizes() {
    let f = instance("vars 2\ndom 1 0 1\ndom 2 0 1\nsym 2 1\n");
    assert_eq!(stdout(&run(&["orbits"], &f)), "3 orbits: sizes 2 1 1\n");
}

#[test]
fn orbits_brute_cap_exits_one() {
    let f = alldiff_file(6, true);
    let o = run(&["orbits", "--brute-cap", "100"], &f);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cap"));
}

#[test]
fn bench_alldiff_six() {
    let f = alldiff_file(6, true);
    let o = run(&["bench", "--oracle", "alldiff"], &f);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let row = |name: &str| -> Vec<String> {
        out.lines()
            .find(|l| l.starts_with(name))
            .unwrap()
            .split_whitespace()
            .map(str::to_owned)
            .collect()
    };
    let lex = row("lex-propagation");
    let gat = row("generate-and-test");
    assert_eq!(lex[1], "1");
    assert_eq!(gat[1], "1");
    assert_eq!(gat[2], "720");
    assert!(out.contains("group size 720"));
}

#[test]
fn check_flags_lex_violation() {
    let f = instance("vars 3\ndom 1 0 1\ndom 2 0 1\ndom 3 0 1\nlex 2 1 3 <= 2 2\n");
    let o = run(&["check"], &f);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("NOT in LEX"));
}

#[test]
fn check_reports_symmetries() {
    let f = alldiff_file(3, true);
    let o = run(&["check"], &f);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.matches("variable symmetry: yes").count(), 2);
    assert!(out.contains("reduces to `lex 1 1 <= 2`"));
}
