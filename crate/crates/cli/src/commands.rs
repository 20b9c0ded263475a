use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use domconf::bench::{read_records, run_suite, BenchPlan, ExternalPlanner, PlannerSpec, ProblemEntry, Randomization, RunLimits};
use domconf::config::{operator_space_size, PrecedenceVector};
use domconf::heuristics::order_operators;
use domconf::macros::{compose_chain, enumerate_positions, place, place_all, MacroRecipe};
use domconf::pddl::{check_problem, ground_task, parse_plan, print_operator, validate_plan};
use domconf::report::{
    bootstrap_par10, cumulative_median, emit_tables, paired_par10, summarize, wilcoxon_signed_rank,
    GroupBy, TableFormat,
};
use domconf::tune::{tune, PlannerObjective, Strategy, TuneBudget, DEFAULT_STEP_SIGMA};
use domconf::{
    apply_configuration, configuration_of, decode_precedence, parse_domain, parse_problem,
    print_domain, random_configuration, space_size, DomainModel, ProblemModel, RunRecord,
};

use crate::{BenchCommand, Command, LimitArgs, MacroCommand, ReportCommand, TuneArgs};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_domain(path: &Path) -> Result<DomainModel> {
    parse_domain(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn load_problem(path: &Path) -> Result<ProblemModel> {
    parse_problem(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

/// Uses the given seed, or draws one and reports it so the run can be replayed.
fn seed_or_fresh(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn limits(base: RunLimits, args: &LimitArgs) -> RunLimits {
    RunLimits {
        cutoff_seconds: args.cutoff.unwrap_or(base.cutoff_seconds),
        memory_megabytes: args.mem.unwrap_or(base.memory_megabytes),
        repetitions: args.reps.unwrap_or(base.repetitions),
    }
}

fn jobs(args: &LimitArgs) -> usize {
    args.jobs
        .map(|j| j as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Renders 1719926784000 as `1.72e12`.
fn scientific(digits: &str) -> String {
    let exp = digits.len() - 1;
    let mantissa: f64 = format!("{}.{}", &digits[..1], &digits[1..]).parse().unwrap_or(0.0);
    format!("{mantissa:.2}e{exp}")
}

pub fn run(command: Command) -> Result<u8> {
    match command {
        Command::Validate { domain, problem, plan } => {
            let d = load_domain(&domain)?;
            let Some(problem) = problem else {
                println!("domain {}: {} predicates, {} operators", d.name, d.predicates.len(), d.operators.len());
                return Ok(0);
            };
            let p = load_problem(&problem)?;
            check_problem(&d, &p).with_context(|| format!("{}", problem.display()))?;
            let Some(plan) = plan else {
                println!("problem {}: {} objects, {} goal atoms", p.name, p.objects.len(), p.goal.len());
                return Ok(0);
            };
            let steps = parse_plan(&read(&plan)?).with_context(|| format!("{}", plan.display()))?;
            let task = ground_task(&d, &p)?;
            let report = validate_plan(&task, &steps)?;
            print!("{}", json(&report));
            Ok(if report.valid { 0 } else { 2 })
        }
        Command::SpaceSize { domain, operator } => {
            let d = load_domain(&domain)?;
            let n = match operator {
                Some(name) => {
                    let op = d.operator(&name).with_context(|| format!("no operator `{name}`"))?;
                    operator_space_size(op)
                }
                None => space_size(&d),
            };
            let digits = n.to_string();
            println!("{digits}");
            println!("{}", scientific(&digits));
            Ok(0)
        }
        Command::Shuffle { domain, seed, config_out, output } => {
            let d = load_domain(&domain)?;
            let seed = seed_or_fresh(seed);
            let c = random_configuration(&d, seed);
            if let Some(p) = config_out {
                emit(Some(&p), &json(&c))?;
            }
            emit(output.as_deref(), &print_domain(&apply_configuration(&d, &c)?))?;
            Ok(0)
        }
        Command::Order { domain, heuristic, output } => {
            let d = load_domain(&domain)?;
            emit(output.as_deref(), &print_domain(&order_operators(&d, heuristic)))?;
            Ok(0)
        }
        Command::Decode { domain, vector, config_only, output } => {
            let d = load_domain(&domain)?;
            let text = read(&vector)?;
            let values: Vec<f64> = match serde_json::from_str::<Vec<f64>>(&text) {
                Ok(v) => v,
                Err(_) => {
                    serde_json::from_str::<PrecedenceVector>(&text)
                        .with_context(|| format!("{}: expected an array of numbers", vector.display()))?
                        .values
                }
            };
            let v = PrecedenceVector::new(domconf::config::layout(&d), values)?;
            let c = decode_precedence(&d, &v)?;
            if config_only {
                emit(output.as_deref(), &json(&c))?;
            } else {
                emit(output.as_deref(), &print_domain(&apply_configuration(&d, &c)?))?;
            }
            Ok(0)
        }
        Command::ExtractConfig { domain, output } => {
            let d = load_domain(&domain)?;
            emit(output.as_deref(), &json(&configuration_of(&d)))?;
            Ok(0)
        }
        Command::Macro(m) => run_macro(m),
        Command::Bench(BenchCommand::Run { plan, output, limits: args }) => {
            let mut bench = BenchPlan::load(&plan)?;
            bench.limits = limits(bench.limits, &args);
            bench.validate()?;
            let outcome = run_suite(&bench, &output, jobs(&args))?;
            eprintln!(
                "{} cells run, {} already present, {} crashed",
                outcome.executed, outcome.skipped, outcome.crashed
            );
            // per-instance runs give every problem its own variant
            let group_by = match bench.randomization {
                Randomization::Off => GroupBy::Variant,
                Randomization::PerInstance { .. } => GroupBy::Planner,
            };
            if !outcome.records.is_empty() {
                match summarize(&outcome.records, group_by).and_then(|rows| emit_tables(&rows, TableFormat::Csv)) {
                    Ok(table) => print!("{table}"),
                    Err(e) => log::warn!("no summary: {e}"),
                }
            }
            Ok(if outcome.crashed > 0 { 3 } else { 0 })
        }
        Command::Tune(args) => run_tune(args),
        Command::Report(r) => run_report(r),
    }
}

fn load_recipe(path: &Path) -> Result<MacroRecipe> {
    load_json(path)
}

fn run_macro(m: MacroCommand) -> Result<u8> {
    match m {
        MacroCommand::Build { domain, recipe, output } => {
            let d = load_domain(&domain)?;
            let op = compose_chain(&load_recipe(&recipe)?, &d)?;
            emit(output.as_deref(), &print_operator(&op))?;
        }
        MacroCommand::Insert { domain, recipe, position, output } => {
            let d = load_domain(&domain)?;
            let extended = place(&d, &load_recipe(&recipe)?, position)?;
            emit(output.as_deref(), &print_domain(&extended))?;
        }
        MacroCommand::Enumerate { domain, recipe, output } => {
            let d = load_domain(&domain)?;
            let op = compose_chain(&load_recipe(&recipe)?, &d)?;
            fs::create_dir_all(&output).with_context(|| format!("cannot create {}", output.display()))?;
            let stem = domain.file_stem().map_or("domain".into(), |s| s.to_string_lossy().into_owned());
            for (i, model) in enumerate_positions(&d, &op)?.iter().enumerate() {
                let path = output.join(format!("{stem}-{}-pos{}.pddl", op.name, i + 1));
                emit(Some(&path), &print_domain(model))?;
                println!("{}", path.display());
            }
        }
        MacroCommand::Place { domain, add, output } => {
            let d = load_domain(&domain)?;
            let recipes = add
                .iter()
                .map(|(path, p)| Ok((load_recipe(path)?, *p)))
                .collect::<Result<Vec<_>>>()?;
            emit(output.as_deref(), &print_domain(&place_all(&d, &recipes)?))?;
        }
    }
    Ok(0)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct TuneFile {
    planner: PlannerSpec,
    domain: PathBuf,
    problems: Vec<PathBuf>,
    #[serde(default)]
    limits: RunLimits,
    strategy: Option<Strategy>,
    budget: Option<usize>,
    seed: Option<u64>,
    step_sigma: Option<f64>,
    wall_clock_seconds: Option<f64>,
}

fn run_tune(args: TuneArgs) -> Result<u8> {
    let spec: TuneFile = load_json(&args.spec)?;
    let base = args.spec.parent().unwrap_or(Path::new("."));
    let d = load_domain(&base.join(&spec.domain))?;
    let problems = spec
        .problems
        .iter()
        .map(|p| ProblemEntry::load(&base.join(p)))
        .collect::<Result<Vec<_>, _>>()?;
    if problems.is_empty() {
        bail!("{}: at least one training problem is needed", args.spec.display());
    }
    for p in &problems {
        check_problem(&d, &p.model).with_context(|| format!("{}", p.path.display()))?;
    }
    let planner = ExternalPlanner::new(spec.planner)?;
    let run_limits = limits(spec.limits, &args.limits);
    let mut objective = PlannerObjective::new(&planner, &problems, run_limits, jobs(&args.limits))?;
    let budget = TuneBudget {
        max_evaluations: args.budget.map(|b| b as usize).or(spec.budget).unwrap_or(100),
        wall_clock_seconds: spec.wall_clock_seconds,
        seed: seed_or_fresh(args.seed.or(spec.seed)),
    };
    let strategy = args.strategy.or(spec.strategy).unwrap_or(Strategy::Ils);
    let sigma = args.step_sigma.or(spec.step_sigma).unwrap_or(DEFAULT_STEP_SIGMA);
    let result = tune(strategy, &d, &mut objective, budget, sigma)?;
    emit(Some(&args.output), &json(&result))?;
    let best = apply_configuration(&d, &result.best_configuration)?;
    emit(Some(&args.output.with_extension("pddl")), &print_domain(&best))?;
    eprintln!(
        "best objective {} after {} evaluations",
        result.best_objective, result.evaluations
    );
    Ok(0)
}

fn load_records(paths: &[PathBuf]) -> Result<Vec<RunRecord>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_records(p)?.1);
    }
    Ok(all)
}

fn run_report(r: ReportCommand) -> Result<u8> {
    match r {
        ReportCommand::Summarize { results, group_by, format, cumulative, output } => {
            if cumulative {
                let per_domain = results
                    .iter()
                    .map(|p| Ok(summarize(&read_records(p)?.1, GroupBy::Variant)?))
                    .collect::<Result<Vec<_>>>()?;
                emit(output.as_deref(), &json(&cumulative_median(&per_domain)?))?;
            } else {
                let rows = summarize(&load_records(&results)?, group_by.into())?;
                emit(output.as_deref(), &emit_tables(&rows, format)?)?;
            }
        }
        ReportCommand::Wilcoxon {
            results,
            planner_a,
            variant_a,
            planner_b,
            variant_b,
            alpha,
            output,
        } => {
            let records = load_records(&results)?;
            let sample = paired_par10(
                &records,
                (&planner_a, variant_a.as_deref()),
                (&planner_b, variant_b.as_deref()),
            )?;
            emit(output.as_deref(), &json(&wilcoxon_signed_rank(&sample, alpha)))?;
        }
        ReportCommand::Bootstrap { results, resamples, seed, output } => {
            let records = load_records(&results)?;
            let seed = seed_or_fresh(seed);
            emit(output.as_deref(), &json(&bootstrap_par10(&records, resamples, seed)?))?;
        }
    }
    Ok(0)
}
