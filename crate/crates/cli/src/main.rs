use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use commands::Failure;

/// Enumerate CSP solutions with polynomial delay, breaking variable
/// symmetries with lexicographic-leader constraints.
#[derive(Parser, Debug)]
#[command(name = "lexenum", version, about)]
#[command(after_help = "Exit status: 0 on success (including zero solutions), \
1 when a budget or cap stops the run early, 2 on unreadable or invalid input.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print every solution of the problem and lex constraints. `sym` lines are ignored.
    Enumerate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print one representative per symmetry class using the reduced
    /// lexleader of each `sym` line and an extension oracle.
    EnumerateSym {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        sym: SymArgs,
    },
    /// Print the reduced lex constraint of each `sym` line in instance syntax.
    Reduce {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', value_name = "I1,I2,...")]
        order: Option<Vec<usize>>,
    },
    /// Brute-force the solution set and report its orbits under the `sym` generators.
    Orbits {
        file: PathBuf,
        #[command(flatten)]
        caps: CapArgs,
    },
    /// Compare lex-propagation enumeration against generate-and-test.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        sym: SymArgs,
        #[command(flatten)]
        caps: CapArgs,
    },
    /// Report LEX membership of every lex constraint and verify every symmetry.
    Check {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', value_name = "I1,I2,...")]
        order: Option<Vec<usize>>,
        /// Largest microstructure (nodes or tuples) built for symmetry verification.
        #[arg(long, default_value_t = 100_000)]
        msc_cap: u64,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Instance file.
    file: PathBuf,
    /// Search order as 1-based variable indices, overriding the file's `order` line.
    #[arg(long, value_delimiter = ',', value_name = "I1,I2,...")]
    order: Option<Vec<usize>>,
    /// Write per-gap delay metrics as CSV.
    #[arg(long, value_name = "PATH")]
    metrics_out: Option<PathBuf>,
    /// Stop after this many search nodes.
    #[arg(long, default_value_t = 100_000_000)]
    node_budget: u64,
    /// Stop after this many oracle calls.
    #[arg(long, default_value_t = 10_000_000)]
    oracle_call_budget: u64,
}

#[derive(Args, Debug)]
struct SymArgs {
    /// Extension oracle consulted after every tentative assignment.
    #[arg(long, value_enum, default_value_t = OracleKind::Exact)]
    oracle: OracleKind,
    /// Node budget of a single exact-oracle call.
    #[arg(long, default_value_t = 10_000_000)]
    oracle_node_budget: u64,
    /// Largest microstructure (nodes or tuples) built for symmetry
    /// verification; above it verification is skipped with a warning.
    #[arg(long, default_value_t = 100_000)]
    msc_cap: u64,
}

#[derive(Args, Debug)]
struct CapArgs {
    /// Largest symmetry group generated.
    #[arg(long, default_value_t = 100_000)]
    group_cap: u64,
    /// Largest assignment space searched by brute force.
    #[arg(long, default_value_t = 10_000_000)]
    brute_cap: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OracleKind {
    /// Complete search with GAC over the problem constraints.
    Exact,
    /// Bipartite matching; requires an alldifferent clique.
    Alldiff,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Enumerate { run } => commands::enumerate(&run),
        Command::EnumerateSym { run, sym } => commands::enumerate_sym(&run, &sym),
        Command::Reduce { file, order } => commands::reduce(&file, order.as_deref()),
        Command::Orbits { file, caps } => commands::orbits(&file, &caps),
        Command::Bench { run, sym, caps } => commands::bench(&run, &sym, &caps),
        Command::Check { file, order, msc_cap } => commands::check(&file, order.as_deref(), msc_cap),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Incomplete(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
