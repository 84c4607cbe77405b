use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::ops::ControlFlow;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use lexenum::format::{format_lex, parse_instance, Instance};
use lexenum::lex::{lexleader_under_order, reduce_under_order};
use lexenum::search::{
    enumerate_all, enumerate_generate_and_test, enumerate_with_symmetry, Caps, FnSink, SearchConfig,
};
use lexenum::symmetry::{orbits_of_solutions, verify_variable_symmetry};
use lexenum::{AlldiffOracle, Enumeration, Error, ExactOracle, Oracle, Permutation, SearchOrder, Termination, Value};

use crate::{CapArgs, OracleKind, RunArgs, SymArgs};

/// Exit 2 for bad input, exit 1 for runs that could not finish.
pub enum Failure {
    Input(anyhow::Error),
    Incomplete(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::CapExceeded { .. } | Error::OracleBudgetExhausted(_) => Failure::Incomplete(e.into()),
            _ => Failure::Input(e.into()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Incomplete(e.into())
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn input(e: anyhow::Error) -> Failure {
    Failure::Input(e)
}

fn load(path: &Path) -> Result<Instance, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(input)?;
    parse_instance(&text)
        .with_context(|| format!("{}", path.display()))
        .map_err(input)
}

/// Applies a `--order` override (1-based) to the instance.
fn load_with_order(path: &Path, order: Option<&[usize]>) -> Result<Instance, Failure> {
    let mut inst = load(path)?;
    if let Some(order) = order {
        let n = inst.csp.n();
        if order.len() != n || order.iter().any(|&i| i == 0 || i > n) {
            return Err(input(anyhow!("--order needs a permutation of 1..{n}")));
        }
        inst.csp.order = SearchOrder::new(order.iter().map(|i| i - 1).collect())?;
    }
    Ok(inst)
}

fn sym_text(sigma: &Permutation) -> String {
    let image: Vec<String> = sigma.image().iter().map(|i| (i + 1).to_string()).collect();
    format!("sym {}", image.join(" "))
}

fn require_involutions(inst: &Instance) -> Result<(), Failure> {
    for (sigma, line) in inst.csp.symmetries.iter().zip(&inst.sym_lines) {
        if !sigma.is_involution() {
            return Err(input(anyhow!("line {line}: `{}` is not an involution", sym_text(sigma))));
        }
    }
    Ok(())
}

/// Rejects symmetries that are provably not variable symmetries; skips the
/// check with a warning when the microstructure is over the cap.
fn verify_symmetries(inst: &Instance, cap: u64) -> Result<(), Failure> {
    for (sigma, line) in inst.csp.symmetries.iter().zip(&inst.sym_lines) {
        match verify_variable_symmetry(&inst.csp, sigma, cap) {
            Ok(true) => {}
            Ok(false) => {
                return Err(input(anyhow!("line {line}: `{}` is not a variable symmetry", sym_text(sigma))));
            }
            Err(e @ Error::CapExceeded { .. }) => {
                eprintln!("warning: line {line}: symmetry not verified: {e}");
            }
            Err(e) => return Err(input(anyhow!("line {line}: {e}"))),
        }
    }
    Ok(())
}

fn config(run: &RunArgs) -> SearchConfig {
    SearchConfig {
        node_budget: Some(run.node_budget),
        oracle_call_budget: Some(run.oracle_call_budget),
        allow_non_lex: false,
    }
}

fn make_oracle(inst: &Instance, sym: &SymArgs) -> Result<Box<dyn Oracle>, Failure> {
    Ok(match sym.oracle {
        OracleKind::Exact => Box::new(ExactOracle::with_node_budget(sym.oracle_node_budget)),
        OracleKind::Alldiff => Box::new(AlldiffOracle::new(&inst.csp)?),
    })
}

fn write_solution(out: &mut impl Write, order: &SearchOrder, values: &[Value]) -> io::Result<()> {
    let mut first = true;
    for v in order.project(values) {
        if !first {
            out.write_all(b" ")?;
        }
        first = false;
        write!(out, "{v}")?;
    }
    out.write_all(b"\n")
}

/// Runs `engine` with a sink printing to stdout, then writes metrics and maps
/// the termination to an exit status.
fn print_run(
    run: &RunArgs,
    order: &SearchOrder,
    engine: impl FnOnce(&mut dyn lexenum::SolutionSink) -> lexenum::Result<Enumeration>,
) -> CmdResult {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut write_error = None;
    let result = {
        let mut sink = FnSink(|values: &[Value]| match write_solution(&mut out, order, values) {
            Ok(()) => ControlFlow::Continue(()),
            Err(e) => {
                write_error = Some(e);
                ControlFlow::Break(())
            }
        });
        engine(&mut sink)
    };
    if let Some(e) = write_error {
        return Err(e.into());
    }
    out.flush()?;
    let enumeration = result?;
    if let Some(path) = &run.metrics_out {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()));
        let file = file.map_err(Failure::Incomplete)?;
        enumeration.metrics.write_csv(BufWriter::new(file))?;
    }
    match enumeration.termination {
        Termination::Completed => Ok(ExitCode::SUCCESS),
        Termination::Stopped => Err(Failure::Incomplete(anyhow!("enumeration stopped early"))),
        Termination::NodeBudgetExhausted => Err(Failure::Incomplete(anyhow!(
            "node budget of {} exhausted",
            run.node_budget
        ))),
        Termination::OracleBudgetExhausted => Err(Failure::Incomplete(anyhow!(
            "oracle call budget of {} exhausted",
            run.oracle_call_budget
        ))),
    }
}

pub fn enumerate(run: &RunArgs) -> CmdResult {
    let inst = load_with_order(&run.file, run.order.as_deref())?;
    let csp = &inst.csp;
    let config = config(run);
    print_run(run, &csp.order, |sink| enumerate_all(csp, &csp.order, sink, &config))
}

pub fn enumerate_sym(run: &RunArgs, sym: &SymArgs) -> CmdResult {
    let inst = load_with_order(&run.file, run.order.as_deref())?;
    require_involutions(&inst)?;
    verify_symmetries(&inst, sym.msc_cap)?;
    let mut oracle = make_oracle(&inst, sym)?;
    let csp = &inst.csp;
    let config = config(run);
    print_run(run, &csp.order, |sink| {
        enumerate_with_symmetry(csp, &csp.symmetries, oracle.as_mut(), &csp.order, sink, &config)
    })
}

pub fn reduce(file: &Path, order: Option<&[usize]>) -> CmdResult {
    let inst = load_with_order(file, order)?;
    require_involutions(&inst)?;
    let mut out = io::stdout().lock();
    for sigma in &inst.csp.symmetries {
        writeln!(out, "{}", format_lex(&reduce_under_order(sigma, &inst.csp.order)?))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn check_space(csp: &lexenum::Csp, cap: u64) -> Result<(), Failure> {
    let space = csp
        .domains
        .iter()
        .try_fold(1u64, |acc, d| acc.checked_mul(d.size() as u64))
        .unwrap_or(u64::MAX);
    if space > cap {
        return Err(Error::CapExceeded {
            what: "assignment space",
            cap,
        }
        .into());
    }
    Ok(())
}

pub fn orbits(file: &Path, caps: &CapArgs) -> CmdResult {
    let inst = load(file)?;
    let mut csp = inst.csp;
    // orbits are taken over the problem's own solutions
    csp.lex_constraints.clear();
    check_space(&csp, caps.brute_cap)?;
    lexenum::symmetry::generate_group(csp.n(), &csp.symmetries, caps.group_cap)?;
    let mut solutions = Vec::new();
    enumerate_all(&csp, &SearchOrder::identity(csp.n()), &mut solutions, &SearchConfig::default())?;
    let orbits = orbits_of_solutions(&solutions, &csp.symmetries)?;
    let mut sizes: Vec<usize> = orbits.iter().map(Vec::len).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let sizes: Vec<String> = sizes.iter().map(ToString::to_string).collect();
    let line = match sizes.len() {
        0 => "0 orbits".to_string(),
        1 => format!("1 orbit: size {}", sizes[0]),
        k => format!("{k} orbits: sizes {}", sizes.join(" ")),
    };
    println!("{line}");
    Ok(ExitCode::SUCCESS)
}

pub fn bench(run: &RunArgs, sym: &SymArgs, caps: &CapArgs) -> CmdResult {
    let inst = load_with_order(&run.file, run.order.as_deref())?;
    require_involutions(&inst)?;
    verify_symmetries(&inst, sym.msc_cap)?;
    let mut oracle = make_oracle(&inst, sym)?;
    let csp = &inst.csp;

    let start = Instant::now();
    let mut count = lexenum::search::Counter::default();
    let lex = enumerate_with_symmetry(csp, &csp.symmetries, oracle.as_mut(), &csp.order, &mut count, &config(run))?;
    let lex_ms = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let baseline = enumerate_generate_and_test(
        csp,
        &csp.symmetries,
        &csp.order,
        &Caps {
            group: caps.group_cap,
            assignments: caps.brute_cap,
        },
    )?;
    let baseline_ms = start.elapsed().as_secs_f64() * 1e3;

    if let Some(path) = &run.metrics_out {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()));
        lex.metrics.write_csv(BufWriter::new(file.map_err(Failure::Incomplete)?))?;
    }

    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<18} {:>8} {:>11} {:>14} {:>21} {:>12}",
        "engine", "emitted", "enumerated", "max_nodes/gap", "max_oracle_calls/gap", "total_ms"
    )?;
    writeln!(
        out,
        "{:<18} {:>8} {:>11} {:>14} {:>21} {:>12.3}",
        "lex-propagation",
        lex.metrics.solutions,
        lex.metrics.solutions,
        lex.metrics.max_nodes_per_gap(),
        lex.metrics.max_oracle_calls_per_gap(),
        lex_ms
    )?;
    writeln!(
        out,
        "{:<18} {:>8} {:>11} {:>14} {:>21} {:>12.3}",
        "generate-and-test",
        baseline.canonical.len(),
        baseline.enumerated,
        baseline.metrics.max_nodes_per_gap(),
        "-",
        baseline_ms
    )?;
    writeln!(out, "group size {}", baseline.group_size)?;
    if lex.termination != Termination::Completed {
        return Err(Failure::Incomplete(anyhow!("lex-propagation run incomplete: {:?}", lex.termination)));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn check(file: &Path, order: Option<&[usize]>, msc_cap: u64) -> CmdResult {
    let inst = load_with_order(file, order)?;
    let csp = &inst.csp;
    let mut ok = true;
    let mut out = io::stdout().lock();
    for (c, line) in csp.lex_constraints.iter().zip(&inst.lex_lines) {
        let member = c.is_in_lex_under(&csp.order);
        ok &= member;
        let verdict = if member { "in LEX" } else { "NOT in LEX" };
        writeln!(out, "line {line}: {}: {verdict}", format_lex(c))?;
    }
    for (sigma, line) in csp.symmetries.iter().zip(&inst.sym_lines) {
        let lex = if sigma.is_involution() {
            let reduced = reduce_under_order(sigma, &csp.order)?;
            let verdict = if reduced.is_in_lex_under(&csp.order) { "in LEX" } else { "NOT in LEX" };
            format!("involution, reduces to `{}`: {verdict}", format_lex(&reduced))
        } else {
            ok = false;
            let full = lexleader_under_order(sigma, &csp.order).into_lex_leq();
            let verdict = if full.is_in_lex_under(&csp.order) { "in LEX" } else { "NOT in LEX" };
            format!("not an involution, lexleader `{}`: {verdict}", format_lex(&full))
        };
        let verified = match verify_variable_symmetry(csp, sigma, msc_cap) {
            Ok(true) => "variable symmetry: yes".to_string(),
            Ok(false) => {
                ok = false;
                "variable symmetry: NO".to_string()
            }
            Err(e @ Error::CapExceeded { .. }) => format!("variable symmetry: not checked ({e})"),
            Err(e) => {
                ok = false;
                format!("variable symmetry: NO ({e})")
            }
        };
        writeln!(out, "line {line}: {}: {lex}; {verified}", sym_text(sigma))?;
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
