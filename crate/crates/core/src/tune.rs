//! Search over precedence vectors for a domain configuration that minimizes
//! (or, adversarially, maximizes) a planner's mean PAR10 on training problems.
//!
//! Evaluations are cached by the digest of the decoded configuration, so two
//! vectors that decode to the same orders cost one evaluation. Cache hits do
//! not count against the budget.

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{evaluate_model, BenchError, Planner, ProblemEntry, RunLimits, RunRecord};
use crate::config::{apply_configuration, decode_precedence, ConfigError, ConfigurationSpec, PrecedenceVector};
use crate::pddl::DomainModel;

pub const DEFAULT_STEP_SIGMA: f64 = 0.2;
pub const RESTART_AFTER: usize = 20;

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("step sigma must lie in (0, 1], got {0}")]
    StepSigma(f64),
    #[error("budget must allow at least one evaluation")]
    Budget,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

/// The quantity being tuned. Lower is better.
pub trait Objective {
    fn evaluate(&mut self, model: &DomainModel) -> f64;
}

impl<F: FnMut(&DomainModel) -> f64> Objective for F {
    fn evaluate(&mut self, model: &DomainModel) -> f64 {
        self(model)
    }
}

/// Mean PAR10 of a planner over training problems, each problem scored by
/// the median of its repetitions.
pub struct PlannerObjective<'a> {
    pub planner: &'a dyn Planner,
    pub problems: &'a [ProblemEntry],
    pub limits: RunLimits,
    pub jobs: usize,
    /// Median records of every evaluation, in evaluation order.
    pub records: Vec<RunRecord>,
}

impl<'a> PlannerObjective<'a> {
    pub fn new(
        planner: &'a dyn Planner,
        problems: &'a [ProblemEntry],
        limits: RunLimits,
        jobs: usize,
    ) -> Result<Self, TuneError> {
        limits.validate()?;
        if problems.is_empty() {
            return Err(BenchError::Empty.into());
        }
        Ok(PlannerObjective {
            planner,
            problems,
            limits,
            jobs,
            records: Vec::new(),
        })
    }
}

impl Objective for PlannerObjective<'_> {
    fn evaluate(&mut self, model: &DomainModel) -> f64 {
        match evaluate_model(self.planner, model, self.problems, &self.limits, self.jobs) {
            Ok((value, records)) => {
                self.records.extend(records);
                value
            }
            Err(e) => {
                log::warn!("evaluation failed, scoring as unsolved: {e}");
                10.0 * self.limits.cutoff_seconds
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TuneBudget {
    pub max_evaluations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Ils,
    Adversarial,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "random" => Ok(Strategy::Random),
            "ils" => Ok(Strategy::Ils),
            "adversarial" => Ok(Strategy::Adversarial),
            _ => Err(format!("unknown strategy `{s}` (expected random, ils or adversarial)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HistoryEntry {
    pub evaluation: usize,
    pub vector_digest: String,
    pub config_digest: String,
    pub objective: f64,
    /// Best objective seen so far, in the search direction.
    pub incumbent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TuneResult {
    pub strategy: Strategy,
    pub seed: u64,
    pub best_vector: PrecedenceVector,
    pub best_objective: f64,
    pub best_configuration: ConfigurationSpec,
    pub history: Vec<HistoryEntry>,
    pub evaluations: usize,
    pub cache_hits: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restart_after: Option<usize>,
}

/// Budget accounting, caching and incumbent tracking shared by all
/// strategies. `sign` is 1 to minimize and -1 to maximize.
struct Search<'a, O: Objective> {
    domain: &'a DomainModel,
    objective: &'a mut O,
    budget: TuneBudget,
    sign: f64,
    started: Instant,
    cache: HashMap<String, f64>,
    cache_hits: usize,
    history: Vec<HistoryEntry>,
    best: Option<(PrecedenceVector, f64, ConfigurationSpec)>,
}

impl<'a, O: Objective> Search<'a, O> {
    fn new(domain: &'a DomainModel, objective: &'a mut O, budget: TuneBudget, sign: f64) -> Result<Self, TuneError> {
        if budget.max_evaluations == 0 {
            return Err(TuneError::Budget);
        }
        Ok(Search {
            domain,
            objective,
            budget,
            sign,
            started: Instant::now(),
            cache: HashMap::new(),
            cache_hits: 0,
            history: Vec::new(),
            best: None,
        })
    }

    fn exhausted(&self) -> bool {
        self.history.len() >= self.budget.max_evaluations
            || self
                .budget
                .wall_clock_seconds
                .is_some_and(|cap| !self.history.is_empty() && self.started.elapsed().as_secs_f64() >= cap)
    }

    /// Signed objective of `v`, or `None` once the budget is spent.
    fn score(&mut self, v: &PrecedenceVector) -> Result<Option<f64>, TuneError> {
        let config = decode_precedence(self.domain, v)?;
        let digest = config.digest();
        if let Some(&value) = self.cache.get(&digest) {
            self.cache_hits += 1;
            return Ok(Some(self.sign * value));
        }
        if self.exhausted() {
            return Ok(None);
        }
        let model = apply_configuration(self.domain, &config)?;
        let value = self.objective.evaluate(&model);
        self.cache.insert(digest.clone(), value);
        let improves = self
            .best
            .as_ref()
            .is_none_or(|(_, best, _)| self.sign * value < self.sign * best);
        if improves {
            self.best = Some((v.clone(), value, config));
        }
        self.history.push(HistoryEntry {
            evaluation: self.history.len() + 1,
            vector_digest: v.digest(),
            config_digest: digest,
            objective: value,
            incumbent: self.best.as_ref().unwrap().1,
        });
        Ok(Some(self.sign * value))
    }

    /// Cap on proposals, so a search whose candidates keep hitting the cache
    /// still terminates.
    fn proposal_cap(&self) -> usize {
        self.budget.max_evaluations.saturating_mul(50).saturating_add(1000)
    }

    fn finish(self, strategy: Strategy, step_sigma: Option<f64>) -> TuneResult {
        let (best_vector, best_objective, best_configuration) =
            self.best.expect("the first proposal is always evaluated");
        TuneResult {
            strategy,
            seed: self.budget.seed,
            best_vector,
            best_objective,
            best_configuration,
            evaluations: self.history.len(),
            history: self.history,
            cache_hits: self.cache_hits,
            step_sigma,
            restart_after: step_sigma.map(|_| RESTART_AFTER),
        }
    }
}

/// Evaluates the all-zeros default, then uniform random vectors until the
/// budget is spent.
pub fn tune_random<O: Objective>(
    domain: &DomainModel,
    objective: &mut O,
    budget: TuneBudget,
) -> Result<TuneResult, TuneError> {
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut search = Search::new(domain, objective, budget, 1.0)?;
    search.score(&PrecedenceVector::zeros(domain))?;
    let mut proposals = 1;
    while !search.exhausted() && proposals < search.proposal_cap() {
        search.score(&PrecedenceVector::uniform(domain, &mut rng))?;
        proposals += 1;
    }
    Ok(search.finish(Strategy::Random, None))
}

fn perturb(v: &PrecedenceVector, sigma: f64, rng: &mut ChaCha8Rng) -> PrecedenceVector {
    let m = v.values.len();
    let noise = Normal::new(0.0, sigma).expect("sigma is positive");
    let mut chosen: Vec<usize> = (0..m).filter(|_| rng.random_bool(1.0 / m as f64)).collect();
    if chosen.is_empty() {
        chosen.push(rng.random_range(0..m));
    }
    let mut out = v.clone();
    for i in chosen {
        out.values[i] = (out.values[i] + noise.sample(rng)).clamp(0.0, 1.0);
    }
    out
}

fn local_search<O: Objective>(
    domain: &DomainModel,
    objective: &mut O,
    budget: TuneBudget,
    step_sigma: f64,
    sign: f64,
    strategy: Strategy,
) -> Result<TuneResult, TuneError> {
    if !(step_sigma > 0.0 && step_sigma <= 1.0) {
        return Err(TuneError::StepSigma(step_sigma));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut search = Search::new(domain, objective, budget, sign)?;
    let mut current = PrecedenceVector::zeros(domain);
    let mut current_score = search.score(&current)?.expect("budget allows one evaluation");
    if current.values.is_empty() {
        return Ok(search.finish(strategy, Some(step_sigma)));
    }
    let mut rejections = 0;
    let mut proposals = 1;
    while !search.exhausted() && proposals < search.proposal_cap() {
        proposals += 1;
        if rejections >= RESTART_AFTER {
            let restart = PrecedenceVector::uniform(domain, &mut rng);
            match search.score(&restart)? {
                Some(s) => {
                    current = restart;
                    current_score = s;
                    rejections = 0;
                    continue;
                }
                None => break,
            }
        }
        let candidate = perturb(&current, step_sigma, &mut rng);
        match search.score(&candidate)? {
            Some(s) if s < current_score => {
                current = candidate;
                current_score = s;
                rejections = 0;
            }
            Some(_) => rejections += 1,
            None => break,
        }
    }
    Ok(search.finish(strategy, Some(step_sigma)))
}

/// Iterated local search from the default vector: Gaussian steps on a random
/// coordinate subset, first-improvement acceptance, random restart after
/// [`RESTART_AFTER`] consecutive rejections.
pub fn tune_ils<O: Objective>(
    domain: &DomainModel,
    objective: &mut O,
    budget: TuneBudget,
    step_sigma: f64,
) -> Result<TuneResult, TuneError> {
    local_search(domain, objective, budget, step_sigma, 1.0, Strategy::Ils)
}

/// The same search maximizing the objective, to find harmful configurations.
/// Reported objectives are not negated.
pub fn tune_adversarial<O: Objective>(
    domain: &DomainModel,
    objective: &mut O,
    budget: TuneBudget,
    step_sigma: f64,
) -> Result<TuneResult, TuneError> {
    local_search(domain, objective, budget, step_sigma, -1.0, Strategy::Adversarial)
}

pub fn tune<O: Objective>(
    strategy: Strategy,
    domain: &DomainModel,
    objective: &mut O,
    budget: TuneBudget,
    step_sigma: f64,
) -> Result<TuneResult, TuneError> {
    match strategy {
        Strategy::Random => tune_random(domain, objective, budget),
        Strategy::Ils => tune_ils(domain, objective, budget, step_sigma),
        Strategy::Adversarial => tune_adversarial(domain, objective, budget, step_sigma),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::parse_domain;

    fn logistics() -> DomainModel {
        parse_domain(
            "(define (domain toy)
               (:requirements :strips)
               (:predicates (at ?p ?l) (in ?p ?v) (vat ?v ?l))
               (:action drive :parameters (?v ?a ?b) :precondition (vat ?v ?a)
                  :effect (and (vat ?v ?b) (not (vat ?v ?a))))
               (:action fly :parameters (?v ?a ?b) :precondition (vat ?v ?a)
                  :effect (and (vat ?v ?b) (not (vat ?v ?a))))
               (:action load :parameters (?p ?v ?l) :precondition (and (at ?p ?l) (vat ?v ?l))
                  :effect (and (in ?p ?v) (not (at ?p ?l))))
               (:action unload :parameters (?p ?v ?l) :precondition (and (in ?p ?v) (vat ?v ?l))
                  :effect (and (at ?p ?l) (not (in ?p ?v)))))",
        )
        .unwrap()
    }

    fn position_of_load(d: &DomainModel) -> f64 {
        d.operator_index("load").unwrap() as f64
    }

    fn budget(n: usize, seed: u64) -> TuneBudget {
        TuneBudget {
            max_evaluations: n,
            wall_clock_seconds: None,
            seed,
        }
    }

    #[test]
    fn budget_one_evaluates_only_the_default() {
        let d = logistics();
        for r in [
            tune_random(&d, &mut position_of_load, budget(1, 3)).unwrap(),
            tune_ils(&d, &mut position_of_load, budget(1, 3), 0.2).unwrap(),
            tune_adversarial(&d, &mut position_of_load, budget(1, 3), 0.2).unwrap(),
        ] {
            assert_eq!(r.evaluations, 1);
            assert_eq!(r.best_vector, PrecedenceVector::zeros(&d));
        }
    }

    #[test]
    fn cache_hits_are_free() {
        let d = logistics();
        let mut calls = 0;
        let mut f = |m: &DomainModel| {
            calls += 1;
            position_of_load(m)
        };
        let r = tune_random(&d, &mut f, budget(15, 1)).unwrap();
        assert_eq!(calls, r.evaluations);
        assert!(r.evaluations <= 15);
    }

    #[test]
    fn same_seed_same_history() {
        let d = logistics();
        let a = tune_ils(&d, &mut position_of_load, budget(60, 9), 0.2).unwrap();
        let b = tune_ils(&d, &mut position_of_load, budget(60, 9), 0.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn incumbent_is_monotone_and_best_matches_history() {
        let d = logistics();
        let r = tune_ils(&d, &mut position_of_load, budget(80, 2), 0.2).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1].incumbent <= w[0].incumbent);
        }
        let min = r.history.iter().map(|h| h.objective).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_objective, min);
        let r = tune_adversarial(&d, &mut position_of_load, budget(80, 2), 0.2).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1].incumbent >= w[0].incumbent);
        }
        assert_eq!(r.best_objective, 3.0);
    }

    #[test]
    fn sigma_must_be_in_range() {
        let d = logistics();
        assert!(matches!(
            tune_ils(&d, &mut position_of_load, budget(5, 0), 0.0),
            Err(TuneError::StepSigma(_))
        ));
        assert!(tune_ils(&d, &mut position_of_load, budget(5, 0), 1.5).is_err());
        assert!(matches!(
            tune_random(&d, &mut position_of_load, budget(0, 0)),
            Err(TuneError::Budget)
        ));
    }
}
