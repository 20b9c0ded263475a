use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use domconf::macros::Placement;
use domconf::report::{GroupBy, TableFormat};
use domconf::tune::Strategy;
use domconf::HeuristicId;

mod commands;

/// Reorder, extend and benchmark STRIPS PDDL domain models.
#[derive(Parser)]
#[command(name = "domconf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a domain, optionally a problem against it, and optionally a plan.
    Validate {
        domain: PathBuf,
        problem: Option<PathBuf>,
        /// Plan file to simulate (needs a problem).
        #[arg(long, requires = "problem")]
        plan: Option<PathBuf>,
    },
    /// Number of distinct configurations of a domain model.
    SpaceSize {
        domain: PathBuf,
        /// Count only the precondition and effect orders of one operator.
        #[arg(long)]
        operator: Option<String>,
    },
    /// Apply a uniformly random configuration.
    Shuffle {
        domain: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the drawn configuration as JSON.
        #[arg(long)]
        config_out: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Reorder operators with a syntactic heuristic.
    Order {
        domain: PathBuf,
        #[arg(long)]
        heuristic: HeuristicId,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decode a precedence vector and apply the resulting configuration.
    Decode {
        domain: PathBuf,
        /// JSON array of values, or a precedence vector object.
        vector: PathBuf,
        /// Print the decoded configuration instead of the domain.
        #[arg(long)]
        config_only: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the configuration a domain file is written in.
    ExtractConfig {
        domain: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compose and place macro-operators.
    #[command(subcommand)]
    Macro(MacroCommand),
    /// Run planners over a bench plan.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Search for a configuration that minimizes (or maximizes) PAR10.
    Tune(TuneArgs),
    /// Aggregate results files.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Subcommand)]
enum MacroCommand {
    /// Print the composed macro-operator.
    Build {
        domain: PathBuf,
        recipe: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Insert one macro at a position.
    Insert {
        domain: PathBuf,
        recipe: PathBuf,
        #[arg(long, default_value = "end")]
        position: Placement,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the n+1 models with the macro at every position.
    Enumerate {
        domain: PathBuf,
        recipe: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Insert several macros, each at its own position, in the given order.
    Place {
        domain: PathBuf,
        /// RECIPE=POSITION, repeatable.
        #[arg(long = "add", required = true, value_parser = parse_placement)]
        add: Vec<(PathBuf, Placement)>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_placement(s: &str) -> Result<(PathBuf, Placement), String> {
    let (path, pos) = s
        .split_once('=')
        .ok_or_else(|| format!("expected RECIPE=POSITION, got `{s}`"))?;
    Ok((PathBuf::from(path), pos.parse().map_err(|e| format!("{e}"))?))
}

fn parse_odd(s: &str) -> Result<u32, String> {
    let n: u32 = s.parse().map_err(|e| format!("{e}"))?;
    if n % 2 == 1 {
        Ok(n)
    } else {
        Err(format!("repetitions must be odd, got {n}"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be positive, got {s}"))
    }
}

#[derive(Args, Clone, Copy, Default)]
struct LimitArgs {
    /// Cutoff in seconds [default: 300].
    #[arg(long, value_parser = parse_positive)]
    cutoff: Option<f64>,
    /// Memory limit in MB [default: 4096].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    mem: Option<u64>,
    /// Repetitions per cell, odd [default: 3].
    #[arg(long, value_parser = parse_odd)]
    reps: Option<u32>,
    /// Worker threads [default: available cores].
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Execute every cell of a bench plan not yet in the results file.
    Run {
        plan: PathBuf,
        /// Results file (JSON lines); appended to when it exists.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        limits: LimitArgs,
    },
}

#[derive(Args)]
struct TuneArgs {
    /// Tuning specification (JSON).
    spec: PathBuf,
    /// Result JSON; the best domain goes next to it with a .pddl extension.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    budget: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_positive)]
    step_sigma: Option<f64>,
    #[command(flatten)]
    limits: LimitArgs,
}

#[derive(Subcommand)]
enum ReportCommand {
    /// PAR10, IPC score and coverage per group.
    Summarize {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "variant")]
        group_by: GroupByArg,
        #[arg(long, default_value = "csv")]
        format: TableFormat,
        /// Treat each results file as one domain and sum per-domain medians.
        #[arg(long)]
        cumulative: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Paired signed-rank test on per-problem PAR10 values.
    Wilcoxon {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        planner_a: String,
        #[arg(long)]
        variant_a: Option<String>,
        #[arg(long)]
        planner_b: String,
        #[arg(long)]
        variant_b: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Bootstrap PAR10 over per-problem configurations.
    Bootstrap {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long, default_value_t = 100)]
        resamples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum GroupByArg {
    Variant,
    Planner,
}

impl From<GroupByArg> for GroupBy {
    fn from(g: GroupByArg) -> Self {
        match g {
            GroupByArg::Variant => GroupBy::Variant,
            GroupByArg::Planner => GroupBy::Planner,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
