use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::digest::sha256_hex;
use crate::pddl::{
    parse_domain, parse_plan, parse_problem, print_domain, validate_plan_lifted, DomainModel,
    ProblemModel,
};

use super::suite::ProblemEntry;
use super::{median_record, par10, BenchError, Clock, FailureKind, PlannerSpec, RunLimits, RunRecord};

/// Everything a planner gets for one attempt.
pub struct Job<'a> {
    pub domain_file: &'a Path,
    pub problem_file: &'a Path,
    pub domain: &'a DomainModel,
    pub problem: &'a ProblemModel,
    pub limits: &'a RunLimits,
    /// Private working directory, removed after the attempt.
    pub scratch: &'a Path,
    pub run_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttemptEnd {
    Finished,
    Timeout,
    Memout,
    Crash(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub end: AttemptEnd,
    pub time_seconds: f64,
    pub clock: Clock,
    /// Plan text, if one was produced.
    pub plan: Option<String>,
}

impl Attempt {
    pub fn crash(message: impl Into<String>) -> Self {
        Attempt {
            end: AttemptEnd::Crash(message.into()),
            time_seconds: 0.0,
            clock: Clock::Wall,
            plan: None,
        }
    }
}

pub trait Planner: Send + Sync {
    fn id(&self) -> &str;
    fn attempt(&self, job: &Job<'_>) -> Attempt;
}

/// A planner run as `sh -c <template>` with placeholders filled in.
pub struct ExternalPlanner {
    spec: PlannerSpec,
}

impl ExternalPlanner {
    pub fn new(spec: PlannerSpec) -> Result<Self, BenchError> {
        spec.validate()?;
        Ok(ExternalPlanner { spec })
    }

    fn command(&self, job: &Job<'_>, planfile: &Path) -> String {
        let seed = self
            .spec
            .fixed_seed
            .clone()
            .unwrap_or_else(|| job.run_index.to_string());
        self.spec
            .command_template
            .replace("{domain}", &shell_quote(job.domain_file))
            .replace("{problem}", &shell_quote(job.problem_file))
            .replace("{planfile}", &shell_quote(planfile))
            .replace("{seed}", &seed)
    }
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

/// Reads `planfile`, or the highest-numbered `planfile.N` that anytime
/// planners leave behind.
fn read_plan(planfile: &Path) -> Option<String> {
    if let Ok(text) = fs::read_to_string(planfile) {
        return Some(text);
    }
    let dir = planfile.parent()?;
    let base = planfile.file_name()?.to_str()?;
    let best = fs::read_dir(dir)
        .ok()?
        .filter_map(|e| {
            let name = e.ok()?.file_name().into_string().ok()?;
            let n: u64 = name.strip_prefix(base)?.strip_prefix('.')?.parse().ok()?;
            Some((n, name))
        })
        .max()?;
    fs::read_to_string(dir.join(best.1)).ok()
}

const MEMOUT_MARKERS: [&str; 5] = [
    "out of memory",
    "bad_alloc",
    "memoryerror",
    "cannot allocate memory",
    "memory limit",
];

impl Planner for ExternalPlanner {
    fn id(&self) -> &str {
        &self.spec.id
    }

    fn attempt(&self, job: &Job<'_>) -> Attempt {
        use std::os::unix::process::CommandExt;
        use std::process::{Command, Stdio};

        let planfile = job.scratch.join("plan.txt");
        let cmd = self.command(job, &planfile);
        let log = |name: &str| fs::File::create(job.scratch.join(name));
        let (stdout, stderr) = match (log("stdout.log"), log("stderr.log")) {
            (Ok(o), Ok(e)) => (o, e),
            (Err(e), _) | (_, Err(e)) => return Attempt::crash(format!("scratch: {e}")),
        };
        let mem_bytes = job.limits.memory_megabytes.saturating_mul(1024 * 1024);
        let cpu_secs = job.limits.cutoff_seconds.ceil() as u64 + 1;
        let mut command = Command::new("sh");
        command
            .arg("-c")
            .arg(&cmd)
            .current_dir(job.scratch)
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr);
        // SAFETY: only async-signal-safe libc calls between fork and exec.
        unsafe {
            command.pre_exec(move || {
                libc::setpgid(0, 0);
                let mem = libc::rlimit {
                    rlim_cur: mem_bytes as libc::rlim_t,
                    rlim_max: mem_bytes as libc::rlim_t,
                };
                libc::setrlimit(libc::RLIMIT_AS, &mem);
                let cpu = libc::rlimit {
                    rlim_cur: cpu_secs as libc::rlim_t,
                    rlim_max: (cpu_secs + 2) as libc::rlim_t,
                };
                libc::setrlimit(libc::RLIMIT_CPU, &cpu);
                Ok(())
            });
        }
        let start = Instant::now();
        let child = match command.spawn() {
            Ok(c) => c,
            Err(e) => return Attempt::crash(format!("spawn failed: {e}")),
        };
        let pid = child.id() as libc::pid_t;
        let cutoff = Duration::from_secs_f64(job.limits.cutoff_seconds);
        let mut status = 0;
        // SAFETY: rusage is plain old data.
        let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
        let mut timed_out = false;
        loop {
            // SAFETY: pid is our own unreaped child.
            let r = unsafe { libc::wait4(pid, &mut status, libc::WNOHANG, &mut usage) };
            if r == pid {
                break;
            }
            if r < 0 {
                return Attempt::crash(format!("wait failed: {}", std::io::Error::last_os_error()));
            }
            if start.elapsed() >= cutoff {
                timed_out = true;
                // SAFETY: signals our own process group, then reaps the child.
                unsafe {
                    libc::kill(-pid, libc::SIGKILL);
                    libc::wait4(pid, &mut status, 0, &mut usage);
                }
                break;
            }
            std::thread::sleep(Duration::from_millis(2));
        }
        // SAFETY: clears any background descendants left in the group.
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
        let seconds = |t: libc::timeval| t.tv_sec as f64 + t.tv_usec as f64 / 1e6;
        let cpu = seconds(usage.ru_utime) + seconds(usage.ru_stime);
        let cutoff_s = job.limits.cutoff_seconds;
        let signaled = libc::WIFSIGNALED(status);
        let signal = if signaled { libc::WTERMSIG(status) } else { 0 };
        if timed_out || cpu >= cutoff_s || signal == libc::SIGXCPU {
            return Attempt {
                end: AttemptEnd::Timeout,
                time_seconds: cutoff_s,
                clock: Clock::Cpu,
                plan: None,
            };
        }
        let plan = read_plan(&planfile);
        if plan.is_none() {
            let err = fs::read_to_string(job.scratch.join("stderr.log"))
                .unwrap_or_default()
                .to_lowercase();
            let rss_bytes = usage.ru_maxrss as f64 * 1024.0;
            if MEMOUT_MARKERS.iter().any(|m| err.contains(m)) || rss_bytes >= 0.95 * mem_bytes as f64
            {
                return Attempt {
                    end: AttemptEnd::Memout,
                    time_seconds: cpu,
                    clock: Clock::Cpu,
                    plan: None,
                };
            }
            let why = if signaled {
                format!("killed by signal {signal}")
            } else {
                format!("exited with status {} without a plan", libc::WEXITSTATUS(status))
            };
            return Attempt {
                end: AttemptEnd::Crash(why),
                time_seconds: cpu,
                clock: Clock::Cpu,
                plan: None,
            };
        }
        Attempt {
            end: AttemptEnd::Finished,
            time_seconds: cpu,
            clock: Clock::Cpu,
            plan,
        }
    }
}

/// Identifies the (variant, problem) a record belongs to.
pub struct CellSpec<'a> {
    pub variant: &'a str,
    pub domain: &'a DomainModel,
    pub domain_file: &'a Path,
    pub domain_digest: &'a str,
    pub problem: &'a ProblemEntry,
    pub config_digest: &'a str,
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// One repetition of one cell. Never fails: problems become failure kinds.
pub fn run_cell(
    planner: &dyn Planner,
    cell: &CellSpec<'_>,
    limits: &RunLimits,
    run_index: u32,
    plan_dir: Option<&Path>,
) -> RunRecord {
    let cutoff = limits.cutoff_seconds;
    let mut record = RunRecord {
        planner_id: planner.id().to_string(),
        variant: cell.variant.to_string(),
        domain_file_digest: cell.domain_digest.to_string(),
        problem_id: cell.problem.id.clone(),
        config_digest: cell.config_digest.to_string(),
        run_index,
        solved: false,
        time_seconds: cutoff,
        failure_kind: FailureKind::Crash,
        plan_length: None,
        clock: Clock::Wall,
        cutoff_seconds: cutoff,
        plan_file: None,
        detail: None,
    };
    let scratch = match tempfile::Builder::new().prefix("domconf-run-").tempdir() {
        Ok(d) => d,
        Err(e) => {
            record.detail = Some(format!("scratch directory: {e}"));
            return record;
        }
    };
    let job = Job {
        domain_file: cell.domain_file,
        problem_file: &cell.problem.path,
        domain: cell.domain,
        problem: &cell.problem.model,
        limits,
        scratch: scratch.path(),
        run_index,
    };
    let attempt = planner.attempt(&job);
    record.clock = attempt.clock;
    record.time_seconds = attempt.time_seconds.clamp(0.0, cutoff);
    let text = match attempt.end {
        AttemptEnd::Finished if attempt.time_seconds > cutoff => {
            record.failure_kind = FailureKind::Timeout;
            return record;
        }
        AttemptEnd::Finished => match attempt.plan {
            Some(text) => text,
            None => {
                record.detail = Some("no plan produced".into());
                return record;
            }
        },
        AttemptEnd::Timeout => {
            record.failure_kind = FailureKind::Timeout;
            record.time_seconds = cutoff;
            return record;
        }
        AttemptEnd::Memout => {
            record.failure_kind = FailureKind::Memout;
            return record;
        }
        AttemptEnd::Crash(why) => {
            record.detail = Some(why);
            return record;
        }
    };
    let verdict = parse_plan(&text)
        .and_then(|plan| validate_plan_lifted(cell.domain, &cell.problem.model, &plan));
    match verdict {
        Ok(report) if report.valid => {
            record.solved = true;
            record.failure_kind = FailureKind::None;
            record.plan_length = Some(report.plan_length);
        }
        Ok(report) => {
            record.failure_kind = FailureKind::InvalidPlan;
            record.detail = report.fail_reason;
            return record;
        }
        Err(e) => {
            record.failure_kind = FailureKind::InvalidPlan;
            record.detail = Some(e.to_string());
            return record;
        }
    }
    if let Some(dir) = plan_dir {
        let name = format!(
            "{}__{}__{}__r{}.plan",
            sanitize(&record.planner_id),
            sanitize(&record.variant),
            sanitize(&record.problem_id),
            run_index
        );
        let path = dir.join(name);
        match fs::create_dir_all(dir).and_then(|_| fs::write(&path, &text)) {
            Ok(()) => record.plan_file = Some(path.display().to_string()),
            Err(e) => record.detail = Some(format!("plan not persisted: {e}")),
        }
    }
    record
}

pub(crate) fn domain_digest(text: &str) -> String {
    sha256_hex(text.as_bytes())[..16].to_string()
}

/// Runs an external planner `limits.repetitions` times on one pair of files.
pub fn run_planner(
    spec: &PlannerSpec,
    domain_file: &Path,
    problem_file: &Path,
    limits: &RunLimits,
) -> Result<Vec<RunRecord>, BenchError> {
    limits.validate()?;
    let planner = ExternalPlanner::new(spec.clone())?;
    let text = fs::read_to_string(domain_file).map_err(|e| BenchError::io(domain_file, e))?;
    let domain = parse_domain(&text).map_err(|source| BenchError::Pddl {
        path: domain_file.into(),
        source,
    })?;
    let problem = ProblemEntry::load(problem_file)?;
    let digest = domain_digest(&text);
    let config = crate::config::configuration_of(&domain).digest();
    let cell = CellSpec {
        variant: "input",
        domain: &domain,
        domain_file,
        domain_digest: &digest,
        problem: &problem,
        config_digest: &config,
    };
    Ok((0..limits.repetitions)
        .map(|i| run_cell(&planner, &cell, limits, i, None))
        .collect())
}

/// Mean PAR10 of `domain` over `problems`, each scored by the median of
/// `limits.repetitions` runs. Returns the median records as well.
pub fn evaluate_model(
    planner: &dyn Planner,
    domain: &DomainModel,
    problems: &[ProblemEntry],
    limits: &RunLimits,
    jobs: usize,
) -> Result<(f64, Vec<RunRecord>), BenchError> {
    use rayon::prelude::*;

    limits.validate()?;
    if problems.is_empty() {
        return Err(BenchError::Empty);
    }
    let dir = tempfile::Builder::new()
        .prefix("domconf-eval-")
        .tempdir()
        .map_err(|e| BenchError::io(std::env::temp_dir(), e))?;
    let text = print_domain(domain);
    let domain_file: PathBuf = dir.path().join("domain.pddl");
    fs::write(&domain_file, &text).map_err(|e| BenchError::io(&domain_file, e))?;
    let digest = domain_digest(&text);
    let config = crate::config::configuration_of(domain).digest();
    let cells: Vec<(usize, u32)> = (0..problems.len())
        .flat_map(|p| (0..limits.repetitions).map(move |r| (p, r)))
        .collect();
    let run = |&(p, r): &(usize, u32)| {
        let cell = CellSpec {
            variant: "candidate",
            domain,
            domain_file: &domain_file,
            domain_digest: &digest,
            problem: &problems[p],
            config_digest: &config,
        };
        run_cell(planner, &cell, limits, r, None)
    };
    let records: Vec<RunRecord> = if jobs <= 1 {
        cells.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| BenchError::Limits(format!("worker pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run).collect())
    };
    let medians = records
        .chunks(limits.repetitions as usize)
        .map(median_record)
        .collect::<Result<Vec<_>, _>>()?;
    Ok((par10(&medians, limits.cutoff_seconds)?, medians))
}

pub(crate) fn load_problem(path: &Path) -> Result<ProblemModel, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_problem(&text).map_err(|source| BenchError::Pddl {
        path: path.into(),
        source,
    })
}
