use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::{apply_configuration, configuration_of, random_configuration, ConfigurationSpec};
use crate::derive_seed;
use crate::pddl::{check_problem, parse_domain, print_domain, DomainModel, ProblemModel};

use super::runner::{domain_digest, load_problem, run_cell, CellSpec, ExternalPlanner, Planner};
use super::{BenchError, FailureKind, PlannerSpec, RunLimits, RunRecord};

pub const RESULTS_SCHEMA: &str = "domconf.runs/1";

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemEntry {
    /// File stem of the problem file.
    pub id: String,
    pub path: PathBuf,
    pub model: ProblemModel,
}

impl ProblemEntry {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let model = load_problem(path)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| model.name.clone());
        Ok(ProblemEntry {
            id,
            path: path.to_path_buf(),
            model,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    pub domain: DomainModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Randomization {
    #[default]
    Off,
    /// Every problem gets its own configuration drawn from `(seed, problemId)`.
    PerInstance { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub planners: Vec<PlannerSpec>,
    pub variants: Vec<Variant>,
    pub problems: Vec<ProblemEntry>,
    pub limits: RunLimits,
    pub randomization: Randomization,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlannersRef {
    Inline(Vec<PlannerSpec>),
    Catalog(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantFile {
    pub label: String,
    pub domain: String,
}

/// The on-disk form of a bench plan. Paths are relative to the plan file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanFile {
    pub planners: PlannersRef,
    pub domain_variants: Vec<VariantFile>,
    pub problems: Vec<String>,
    #[serde(default)]
    pub limits: RunLimits,
    #[serde(default)]
    pub randomization: Randomization,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::io(path, e))
}

impl BenchPlan {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let file: PlanFile = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let planners = match file.planners {
            PlannersRef::Inline(p) => p,
            PlannersRef::Catalog(rel) => read_json(&base.join(rel))?,
        };
        let variants = file
            .domain_variants
            .iter()
            .map(|v| {
                let p = base.join(&v.domain);
                let text = fs::read_to_string(&p).map_err(|e| BenchError::io(&p, e))?;
                let domain = parse_domain(&text).map_err(|source| BenchError::Pddl {
                    path: p.clone(),
                    source,
                })?;
                Ok(Variant {
                    label: v.label.clone(),
                    domain,
                })
            })
            .collect::<Result<Vec<_>, BenchError>>()?;
        let problems = file
            .problems
            .iter()
            .map(|rel| ProblemEntry::load(&base.join(rel)))
            .collect::<Result<Vec<_>, _>>()?;
        let plan = BenchPlan {
            planners,
            variants,
            problems,
            limits: file.limits,
            randomization: file.randomization,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        self.limits.validate()?;
        fn unique<'a>(
            what: &'static str,
            names: impl Iterator<Item = &'a str>,
        ) -> Result<(), BenchError> {
            let mut seen = BTreeSet::new();
            for n in names {
                if !seen.insert(n) {
                    return Err(BenchError::Duplicate {
                        what,
                        name: n.to_string(),
                    });
                }
            }
            Ok(())
        }
        unique("planner id", self.planners.iter().map(|p| p.id.as_str()))?;
        unique("variant label", self.variants.iter().map(|v| v.label.as_str()))?;
        unique("problem id", self.problems.iter().map(|p| p.id.as_str()))?;
        for p in &self.planners {
            p.validate()?;
        }
        if self.planners.is_empty() || self.variants.is_empty() || self.problems.is_empty() {
            return Err(BenchError::Empty);
        }
        if matches!(self.randomization, Randomization::PerInstance { .. }) && self.variants.len() > 1
        {
            return Err(BenchError::Inconsistent(
                "per-instance randomization takes exactly one domain variant".into(),
            ));
        }
        for v in &self.variants {
            for p in &self.problems {
                check_problem(&v.domain, &p.model).map_err(|source| BenchError::Pddl {
                    path: p.path.clone(),
                    source,
                })?;
            }
        }
        Ok(())
    }
}

/// One configuration per problem, each drawn from a seed derived from
/// `(seed, problem id)`. The assignment does not depend on problem order.
pub fn randomized_protocol(
    d: &DomainModel,
    problem_ids: &[String],
    seed: u64,
) -> Vec<(String, ConfigurationSpec)> {
    problem_ids
        .iter()
        .map(|id| (id.clone(), random_configuration(d, derive_seed(seed, id))))
        .collect()
}

/// First line of a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResultHeader {
    pub schema: String,
    pub planners: Vec<String>,
    pub variants: Vec<String>,
    pub problems: Vec<String>,
    pub limits: RunLimits,
    pub randomization: Randomization,
}

/// Reads a results file. A torn final line from an interrupted run is
/// ignored.
pub fn read_records(path: &Path) -> Result<(ResultHeader, Vec<RunRecord>), BenchError> {
    let bad = |message: String| BenchError::Results {
        path: path.to_path_buf(),
        message,
    };
    let file = fs::File::open(path).map_err(|e| BenchError::io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| BenchError::io(path, e))?;
    let (first, rest) = lines.split_first().ok_or_else(|| bad("empty file".into()))?;
    let header: ResultHeader =
        serde_json::from_str(first).map_err(|e| bad(format!("header: {e}")))?;
    if header.schema != RESULTS_SCHEMA {
        return Err(bad(format!("unsupported schema `{}`", header.schema)));
    }
    let mut records = Vec::new();
    for (i, line) in rest.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => records.push(r),
            Err(_) if i + 1 == rest.len() => log::warn!("ignoring torn last line of {}", path.display()),
            Err(e) => return Err(bad(format!("line {}: {e}", i + 2))),
        }
    }
    Ok((header, records))
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub executed: usize,
    pub skipped: usize,
    pub crashed: usize,
    /// Every record in the results file, sorted by cell.
    pub records: Vec<RunRecord>,
}

struct PreparedCell {
    variant: String,
    domain: DomainModel,
    domain_file: PathBuf,
    digest: String,
    config: String,
}

/// Runs a plan with the planners its specs describe.
pub fn run_suite(plan: &BenchPlan, out: &Path, jobs: usize) -> Result<SuiteOutcome, BenchError> {
    let planners = plan
        .planners
        .iter()
        .map(|s| ExternalPlanner::new(s.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&dyn Planner> = planners.iter().map(|p| p as &dyn Planner).collect();
    run_suite_with(plan, &refs, out, jobs)
}

/// Drops a torn trailing line so that appended records start on a fresh line.
fn trim_torn_tail(path: &Path) -> Result<(), BenchError> {
    let bytes = fs::read(path).map_err(|e| BenchError::io(path, e))?;
    if bytes.last().is_some_and(|&b| b != b'\n') {
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let f = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(|e| BenchError::io(path, e))?;
        f.set_len(keep as u64).map_err(|e| BenchError::io(path, e))?;
    }
    Ok(())
}

/// Replaces the append-order file with one in cell order, so that the
/// finished file does not depend on worker scheduling.
fn rewrite_sorted(out: &Path, header: &ResultHeader, records: &[RunRecord]) -> Result<(), BenchError> {
    let mut text = serde_json::to_string(header).expect("header serializes") + "\n";
    for r in records {
        text += &serde_json::to_string(r).expect("record serializes");
        text.push('\n');
    }
    let tmp = PathBuf::from(format!("{}.tmp", out.display()));
    fs::write(&tmp, text).map_err(|e| BenchError::io(&tmp, e))?;
    fs::rename(&tmp, out).map_err(|e| BenchError::io(out, e))
}

/// Executes every (planner, variant, problem, repetition) cell not already
/// present in `out`, appending one JSON line per record. Accepted plans are
/// kept under `<out>.plans/`.
pub fn run_suite_with(
    plan: &BenchPlan,
    planners: &[&dyn Planner],
    out: &Path,
    jobs: usize,
) -> Result<SuiteOutcome, BenchError> {
    use rayon::prelude::*;

    plan.validate()?;
    let header = ResultHeader {
        schema: RESULTS_SCHEMA.into(),
        planners: planners.iter().map(|p| p.id().to_string()).collect(),
        variants: plan.variants.iter().map(|v| v.label.clone()).collect(),
        problems: plan.problems.iter().map(|p| p.id.clone()).collect(),
        limits: plan.limits,
        randomization: plan.randomization,
    };
    let mut file_header = header.clone();
    let existing = if out.exists() && fs::metadata(out).map(|m| m.len() > 0).unwrap_or(false) {
        let (found, records) = read_records(out)?;
        if found.limits != header.limits || found.randomization != header.randomization {
            return Err(BenchError::Results {
                path: out.into(),
                message: "limits or randomization differ from the plan; use a new results file"
                    .into(),
            });
        }
        trim_torn_tail(out)?;
        file_header = found;
        records
    } else {
        let mut f = fs::File::create(out).map_err(|e| BenchError::io(out, e))?;
        let line = serde_json::to_string(&header).expect("header serializes");
        writeln!(f, "{line}").map_err(|e| BenchError::io(out, e))?;
        Vec::new()
    };
    let done: BTreeSet<_> = existing.iter().map(RunRecord::cell_key).collect();

    let scratch = tempfile::Builder::new()
        .prefix("domconf-suite-")
        .tempdir()
        .map_err(|e| BenchError::io(std::env::temp_dir(), e))?;
    let mut written = BTreeMap::new();
    let mut prepare = |variant: String, domain: DomainModel| -> Result<PreparedCell, BenchError> {
        let text = print_domain(&domain);
        let digest = domain_digest(&text);
        let domain_file = scratch.path().join(format!("{digest}.pddl"));
        if written.insert(digest.clone(), ()).is_none() {
            fs::write(&domain_file, &text).map_err(|e| BenchError::io(&domain_file, e))?;
        }
        Ok(PreparedCell {
            variant,
            config: configuration_of(&domain).digest(),
            domain,
            domain_file,
            digest,
        })
    };
    // prepared[v][p]
    let mut prepared: Vec<Vec<PreparedCell>> = Vec::new();
    for v in &plan.variants {
        let mut row = Vec::new();
        match plan.randomization {
            Randomization::Off => {
                for _ in &plan.problems {
                    row.push(prepare(v.label.clone(), v.domain.clone())?);
                }
            }
            Randomization::PerInstance { seed } => {
                let ids: Vec<String> = plan.problems.iter().map(|p| p.id.clone()).collect();
                for (_, spec) in randomized_protocol(&v.domain, &ids, seed) {
                    let domain = apply_configuration(&v.domain, &spec)?;
                    row.push(prepare(spec.digest(), domain)?);
                }
            }
        }
        prepared.push(row);
    }

    let mut cells = Vec::new();
    let mut skipped = 0;
    for (pi, planner) in planners.iter().enumerate() {
        for (vi, row) in prepared.iter().enumerate() {
            for (ri, cell) in row.iter().enumerate() {
                for run in 0..plan.limits.repetitions {
                    let key = (
                        planner.id().to_string(),
                        cell.variant.clone(),
                        plan.problems[ri].id.clone(),
                        run,
                    );
                    if done.contains(&key) {
                        skipped += 1;
                    } else {
                        cells.push((pi, vi, ri, run));
                    }
                }
            }
        }
    }

    let plan_dir = PathBuf::from(format!("{}.plans", out.display()));
    let sink = OpenOptions::new()
        .append(true)
        .open(out)
        .map_err(|e| BenchError::io(out, e))?;
    let sink = Mutex::new(sink);
    let write_error = Mutex::new(None);
    let run = |&(pi, vi, ri, run): &(usize, usize, usize, u32)| {
        let c = &prepared[vi][ri];
        let spec = CellSpec {
            variant: &c.variant,
            domain: &c.domain,
            domain_file: &c.domain_file,
            domain_digest: &c.digest,
            problem: &plan.problems[ri],
            config_digest: &c.config,
        };
        let record = run_cell(planners[pi], &spec, &plan.limits, run, Some(&plan_dir));
        let line = serde_json::to_string(&record).expect("record serializes");
        let mut f = sink.lock().unwrap();
        if let Err(e) = writeln!(f, "{line}").and_then(|_| f.flush()) {
            write_error.lock().unwrap().get_or_insert(e.to_string());
        }
        record
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchError::Limits(format!("worker pool: {e}")))?;
    let fresh: Vec<RunRecord> = pool.install(|| cells.par_iter().map(run).collect());
    if let Some(e) = write_error.into_inner().unwrap() {
        return Err(BenchError::io(out, e));
    }

    let crashed = fresh
        .iter()
        .filter(|r| r.failure_kind == FailureKind::Crash)
        .count();
    let executed = fresh.len();
    let mut records = existing;
    records.extend(fresh);
    records.sort_by_key(RunRecord::cell_key);
    rewrite_sorted(out, &file_header, &records)?;
    Ok(SuiteOutcome {
        executed,
        skipped,
        crashed,
        records,
    })
}
