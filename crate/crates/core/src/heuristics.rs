//! Online operator-ordering heuristics.
//!
//! Each heuristic scores operators by one syntactic metric and lists them in
//! decreasing (`1`) or increasing (`2`) order of that score. Sorting is stable,
//! so operators with equal scores keep their original relative order. Only
//! the operator list changes.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pddl::{DomainModel, OperatorSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    /// Number of effects, negative and positive.
    Eff,
    /// Number of preconditions.
    Pre,
    /// Effects per precondition.
    Rat,
    /// Number of negative effects.
    Neg,
    /// Number of parameters.
    Par,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Eff, Metric::Pre, Metric::Rat, Metric::Neg, Metric::Par];

    fn label(self) -> &'static str {
        match self {
            Metric::Eff => "eff",
            Metric::Pre => "pre",
            Metric::Rat => "rat",
            Metric::Neg => "neg",
            Metric::Par => "par",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Decreasing,
    Increasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HeuristicId {
    pub metric: Metric,
    pub direction: Direction,
}

impl HeuristicId {
    /// The ten heuristics, `eff1` through `par2`.
    pub fn all() -> Vec<HeuristicId> {
        Metric::ALL
            .iter()
            .flat_map(|&metric| {
                [Direction::Decreasing, Direction::Increasing]
                    .map(|direction| HeuristicId { metric, direction })
            })
            .collect()
    }
}

impl fmt::Display for HeuristicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self.direction {
            Direction::Decreasing => 1,
            Direction::Increasing => 2,
        };
        write!(f, "{}{d}", self.metric.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown heuristic `{0}` (expected one of eff1, eff2, pre1, pre2, rat1, rat2, neg1, neg2, par1, par2)")]
pub struct UnknownHeuristic(pub String);

impl FromStr for HeuristicId {
    type Err = UnknownHeuristic;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HeuristicId::all()
            .into_iter()
            .find(|h| h.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownHeuristic(s.to_string()))
    }
}

impl Serialize for HeuristicId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for HeuristicId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An exact, non-negative rational score. A zero denominator stands for
/// +infinity (used by `rat` when an operator has no preconditions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorScore {
    pub operator: String,
    pub numerator: u64,
    pub denominator: u64,
}

impl OperatorScore {
    pub fn is_infinite(&self) -> bool {
        self.denominator == 0
    }

    /// Compares scores by value with cross-multiplication.
    pub fn cmp_value(&self, other: &OperatorScore) -> Ordering {
        match (self.is_infinite(), other.is_infinite()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => (self.numerator as u128 * other.denominator as u128)
                .cmp(&(other.numerator as u128 * self.denominator as u128)),
        }
    }
}

pub fn score_operator(o: &OperatorSchema, metric: Metric) -> OperatorScore {
    let count = |n: usize| n as u64;
    let (numerator, denominator) = match metric {
        Metric::Eff => (count(o.eff.len()), 1),
        Metric::Pre => (count(o.pre.len()), 1),
        Metric::Neg => (count(o.del_effects().count()), 1),
        Metric::Par => (count(o.params.len()), 1),
        Metric::Rat => (count(o.eff.len()), count(o.pre.len())),
    };
    OperatorScore {
        operator: o.name.clone(),
        numerator,
        denominator,
    }
}

/// Reorders the operator list by `h`. Predicates, preconditions and effects
/// are untouched.
pub fn order_operators(d: &DomainModel, h: HeuristicId) -> DomainModel {
    let mut scored: Vec<(OperatorScore, &OperatorSchema)> = d
        .operators
        .iter()
        .map(|o| (score_operator(o, h.metric), o))
        .collect();
    scored.sort_by(|a, b| match h.direction {
        Direction::Decreasing => b.0.cmp_value(&a.0),
        Direction::Increasing => a.0.cmp_value(&b.0),
    });
    DomainModel {
        operators: scored.into_iter().map(|(_, o)| o.clone()).collect(),
        ..d.clone()
    }
}

/// One model per heuristic, in `eff1, eff2, ..., par2` order.
pub fn all_heuristic_models(d: &DomainModel) -> Vec<(HeuristicId, DomainModel)> {
    HeuristicId::all()
        .into_iter()
        .map(|h| (h, order_operators(d, h)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::parse_domain;

    fn bw() -> DomainModel {
        parse_domain(include_str!("../fixtures/blocksworld.pddl")).unwrap()
    }

    fn order(d: &DomainModel, h: &str) -> Vec<String> {
        order_operators(d, h.parse().unwrap())
            .operators
            .iter()
            .map(|o| o.name.clone())
            .collect()
    }

    #[test]
    fn blocksworld_scores() {
        let d = bw();
        let stack = d.operator("stack").unwrap();
        let pick = d.operator("pick-up").unwrap();
        let value = |o, m| {
            let s = score_operator(o, m);
            (s.numerator, s.denominator)
        };
        assert_eq!(value(stack, Metric::Eff), (5, 1));
        assert_eq!(value(stack, Metric::Pre), (2, 1));
        assert_eq!(value(stack, Metric::Neg), (2, 1));
        assert_eq!(value(stack, Metric::Par), (2, 1));
        assert_eq!(value(stack, Metric::Rat), (5, 2));
        assert_eq!(value(pick, Metric::Eff), (4, 1));
        assert_eq!(value(pick, Metric::Pre), (3, 1));
        assert_eq!(value(pick, Metric::Neg), (3, 1));
        assert_eq!(value(pick, Metric::Par), (1, 1));
        assert_eq!(value(pick, Metric::Rat), (4, 3));
    }

    #[test]
    fn blocksworld_orders() {
        let d = bw();
        assert_eq!(order(&d, "eff1"), ["stack", "unstack", "pick-up", "put-down"]);
        assert_eq!(order(&d, "eff2"), ["pick-up", "put-down", "stack", "unstack"]);
        assert_eq!(order(&d, "pre2"), ["put-down", "stack", "pick-up", "unstack"]);
    }

    #[test]
    fn empty_precondition_ratio_is_infinite() {
        let d = parse_domain(
            "(define (domain t) (:predicates (p) (q))
               (:action free :parameters () :effect (p))
               (:action costly :parameters () :precondition (and (p) (q)) :effect (and (not (p)) (not (q)) (q))))",
        )
        .unwrap();
        let s = score_operator(d.operator("free").unwrap(), Metric::Rat);
        assert!(s.is_infinite());
        assert_eq!(order(&d, "rat1"), ["free", "costly"]);
        assert_eq!(order(&d, "rat2"), ["costly", "free"]);
    }

    #[test]
    fn ids_round_trip_through_strings() {
        let all = HeuristicId::all();
        assert_eq!(all.len(), 10);
        let names: Vec<String> = all.iter().map(ToString::to_string).collect();
        assert_eq!(
            names,
            ["eff1", "eff2", "pre1", "pre2", "rat1", "rat2", "neg1", "neg2", "par1", "par2"]
        );
        for h in all {
            assert_eq!(h.to_string().parse::<HeuristicId>().unwrap(), h);
        }
        assert!("eff3".parse::<HeuristicId>().is_err());
    }

    #[test]
    fn all_models_has_ten_entries() {
        let d = bw();
        let models = all_heuristic_models(&d);
        assert_eq!(models.len(), 10);
        for (h, m) in &models {
            assert_eq!(m, &order_operators(&d, *h));
        }
    }
}
