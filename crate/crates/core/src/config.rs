//! Domain model configurations: the total orders over predicates, operators,
//! and each operator's preconditions and effects.
//!
//! A [`ConfigurationSpec`] names every element by its canonical name
//! (identifier for predicates and operators, [`Literal::canonical_name`] for
//! precondition and effect literals), so it can be stored next to a model and
//! applied later. A [`PrecedenceVector`] is the continuous encoding used by
//! the tuner: one value in `[0, 1]` per element, grouped into `2 + 2k` groups
//! for `k` operators, decoded by sorting each group by ascending value with
//! alphabetical tie-breaking.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;
use crate::pddl::{DomainModel, Literal, OperatorSchema};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("configuration does not match the model's {group}: {detail}")]
    Mismatch { group: String, detail: String },
    #[error("precedence vector has {found} values, the model needs {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("precedence value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConfigurationSpec {
    pub pred_order: Vec<String>,
    pub op_order: Vec<String>,
    pub pre_order: BTreeMap<String, Vec<String>>,
    pub eff_order: BTreeMap<String, Vec<String>>,
}

impl ConfigurationSpec {
    /// Stable short digest of the configuration's JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("configuration serializes");
        sha256_hex(json.as_bytes())[..16].to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Predicates,
    Operators,
    Pre,
    Eff,
}

/// One group of the precedence layout. `owner` names the operator for
/// precondition and effect groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub kind: GroupKind,
    pub owner: Option<String>,
    pub elements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecedenceVector {
    pub layout: Vec<Group>,
    pub values: Vec<f64>,
}

fn names(lits: &[Literal]) -> Vec<String> {
    lits.iter().map(Literal::canonical_name).collect()
}

/// The precedence layout of a model: predicates, operators, then the
/// preconditions and effects of each operator in model order.
pub fn layout(d: &DomainModel) -> Vec<Group> {
    let mut groups = vec![
        Group {
            kind: GroupKind::Predicates,
            owner: None,
            elements: d.predicates.iter().map(|p| p.name.clone()).collect(),
        },
        Group {
            kind: GroupKind::Operators,
            owner: None,
            elements: d.operators.iter().map(|o| o.name.clone()).collect(),
        },
    ];
    for op in &d.operators {
        groups.push(Group {
            kind: GroupKind::Pre,
            owner: Some(op.name.clone()),
            elements: names(&op.pre),
        });
        groups.push(Group {
            kind: GroupKind::Eff,
            owner: Some(op.name.clone()),
            elements: names(&op.eff),
        });
    }
    groups
}

/// Number of configurable elements: `|P| + |Ops| + Σ (|pre(o)| + |eff(o)|)`.
pub fn vector_dimension(d: &DomainModel) -> usize {
    d.predicates.len()
        + d.operators.len()
        + d.operators
            .iter()
            .map(|o| o.pre.len() + o.eff.len())
            .sum::<usize>()
}

impl PrecedenceVector {
    pub fn new(layout: Vec<Group>, values: Vec<f64>) -> Result<Self, ConfigError> {
        let expected: usize = layout.iter().map(|g| g.elements.len()).sum();
        if expected != values.len() {
            return Err(ConfigError::Dimension {
                expected,
                found: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(ConfigError::OutOfRange { index, value });
        }
        Ok(PrecedenceVector { layout, values })
    }

    /// All-zero vector: decodes to alphabetical order in every group.
    pub fn zeros(d: &DomainModel) -> Self {
        PrecedenceVector {
            layout: layout(d),
            values: vec![0.0; vector_dimension(d)],
        }
    }

    pub fn uniform<R: Rng + ?Sized>(d: &DomainModel, rng: &mut R) -> Self {
        PrecedenceVector {
            layout: layout(d),
            values: (0..vector_dimension(d)).map(|_| rng.random::<f64>()).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn digest(&self) -> String {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        sha256_hex(&bytes)[..16].to_string()
    }
}

fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::from(1u32), |acc, k| acc * k)
}

/// Exact size of the configuration space:
/// `|P|! |Ops|! Π_o (|pre(o)|! |eff(o)|!)`.
pub fn space_size(d: &DomainModel) -> BigUint {
    let mut size = factorial(d.predicates.len()) * factorial(d.operators.len());
    for op in &d.operators {
        size *= operator_space_size(op);
    }
    size
}

/// Number of orderings of one operator's preconditions and effects.
pub fn operator_space_size(op: &OperatorSchema) -> BigUint {
    factorial(op.pre.len()) * factorial(op.eff.len())
}

/// The configuration a model currently embodies.
pub fn configuration_of(d: &DomainModel) -> ConfigurationSpec {
    ConfigurationSpec {
        pred_order: d.predicates.iter().map(|p| p.name.clone()).collect(),
        op_order: d.operators.iter().map(|o| o.name.clone()).collect(),
        pre_order: d
            .operators
            .iter()
            .map(|o| (o.name.clone(), names(&o.pre)))
            .collect(),
        eff_order: d
            .operators
            .iter()
            .map(|o| (o.name.clone(), names(&o.eff)))
            .collect(),
    }
}

/// Draws every order independently and uniformly from a ChaCha8 stream
/// seeded with `seed`.
pub fn random_configuration(d: &DomainModel, seed: u64) -> ConfigurationSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = configuration_of(d);
    c.pred_order.shuffle(&mut rng);
    c.op_order.shuffle(&mut rng);
    for op in &d.operators {
        c.pre_order.get_mut(&op.name).unwrap().shuffle(&mut rng);
        c.eff_order.get_mut(&op.name).unwrap().shuffle(&mut rng);
    }
    c
}

/// Reorders `items` so their keys follow `order`, which must be a
/// permutation of the items' keys.
fn permute<T: Clone>(
    items: &[T],
    key: impl Fn(&T) -> String,
    order: &[String],
    group: &str,
) -> Result<Vec<T>, ConfigError> {
    let mismatch = |detail: String| ConfigError::Mismatch {
        group: group.to_string(),
        detail,
    };
    if order.len() != items.len() {
        return Err(mismatch(format!(
            "expected {} elements, found {}",
            items.len(),
            order.len()
        )));
    }
    let mut used = vec![false; items.len()];
    let mut out = Vec::with_capacity(items.len());
    for name in order {
        let idx = items
            .iter()
            .enumerate()
            .position(|(i, it)| !used[i] && &key(it) == name)
            .ok_or_else(|| mismatch(format!("unknown or repeated element `{name}`")))?;
        used[idx] = true;
        out.push(items[idx].clone());
    }
    Ok(out)
}

fn check_keys(
    map: &BTreeMap<String, Vec<String>>,
    d: &DomainModel,
    group: &str,
) -> Result<(), ConfigError> {
    let expected: BTreeSet<&str> = d.operators.iter().map(|o| o.name.as_str()).collect();
    let found: BTreeSet<&str> = map.keys().map(String::as_str).collect();
    if expected != found {
        return Err(ConfigError::Mismatch {
            group: group.to_string(),
            detail: format!("operators {found:?} do not match {expected:?}"),
        });
    }
    Ok(())
}

/// Reorders the model's elements as `c` prescribes. Nothing but order changes.
pub fn apply_configuration(
    d: &DomainModel,
    c: &ConfigurationSpec,
) -> Result<DomainModel, ConfigError> {
    check_keys(&c.pre_order, d, "preconditions")?;
    check_keys(&c.eff_order, d, "effects")?;
    let predicates = permute(&d.predicates, |p| p.name.clone(), &c.pred_order, "predicates")?;
    let operators = permute(&d.operators, |o| o.name.clone(), &c.op_order, "operators")?;
    let operators = operators
        .into_iter()
        .map(|op| {
            let pre = permute(
                &op.pre,
                Literal::canonical_name,
                &c.pre_order[&op.name],
                &format!("preconditions of `{}`", op.name),
            )?;
            let eff = permute(
                &op.eff,
                Literal::canonical_name,
                &c.eff_order[&op.name],
                &format!("effects of `{}`", op.name),
            )?;
            Ok(OperatorSchema { pre, eff, ..op })
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    Ok(DomainModel {
        predicates,
        operators,
        ..d.clone()
    })
}

fn same_elements(a: &[String], b: &[String]) -> bool {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort();
    b.sort();
    a == b
}

/// Decodes a precedence vector: within each group, elements are sorted by
/// ascending value, ties broken by ascending canonical name.
pub fn decode_precedence(
    d: &DomainModel,
    v: &PrecedenceVector,
) -> Result<ConfigurationSpec, ConfigError> {
    let expected_layout = layout(d);
    let expected = vector_dimension(d);
    if v.values.len() != expected {
        return Err(ConfigError::Dimension {
            expected,
            found: v.values.len(),
        });
    }
    if v.layout.len() != expected_layout.len() {
        return Err(ConfigError::Mismatch {
            group: "layout".into(),
            detail: format!(
                "{} groups, the model has {}",
                v.layout.len(),
                expected_layout.len()
            ),
        });
    }
    let mut c = configuration_of(d);
    let mut offset = 0;
    for (g, want) in v.layout.iter().zip(&expected_layout) {
        if g.kind != want.kind || g.owner != want.owner || !same_elements(&g.elements, &want.elements)
        {
            return Err(ConfigError::Mismatch {
                group: "layout".into(),
                detail: format!("group {:?} {:?} does not match the model", g.kind, g.owner),
            });
        }
        let values = v.values.get(offset..offset + g.elements.len()).ok_or(
            ConfigError::Dimension {
                expected: offset + g.elements.len(),
                found: v.values.len(),
            },
        )?;
        offset += g.elements.len();
        let mut keyed: Vec<(f64, &String)> = values.iter().copied().zip(&g.elements).collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        let order: Vec<String> = keyed.into_iter().map(|(_, n)| n.clone()).collect();
        match g.kind {
            GroupKind::Predicates => c.pred_order = order,
            GroupKind::Operators => c.op_order = order,
            GroupKind::Pre => {
                c.pre_order.insert(g.owner.clone().unwrap(), order);
            }
            GroupKind::Eff => {
                c.eff_order.insert(g.owner.clone().unwrap(), order);
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::parse_domain;

    const BW: &str = include_str!("../fixtures/blocksworld.pddl");

    fn bw() -> DomainModel {
        parse_domain(BW).unwrap()
    }

    #[test]
    fn blocksworld_dimension_and_groups() {
        let d = bw();
        assert_eq!(vector_dimension(&d), 36);
        assert_eq!(layout(&d).len(), 2 + 2 * 4);
    }

    #[test]
    fn single_element_model_has_one_configuration() {
        let d = parse_domain(
            "(define (domain t) (:predicates (p)) (:action a :parameters () :precondition (p) :effect (not (p))))",
        )
        .unwrap();
        assert_eq!(space_size(&d), BigUint::from(1u32));
        for seed in 0..5 {
            assert_eq!(random_configuration(&d, seed), configuration_of(&d));
        }
    }

    #[test]
    fn apply_rejects_unknown_and_missing_names() {
        let d = bw();
        let mut c = configuration_of(&d);
        c.pred_order[0] = "bogus".into();
        assert!(matches!(
            apply_configuration(&d, &c),
            Err(ConfigError::Mismatch { .. })
        ));
        let mut c = configuration_of(&d);
        c.op_order.pop();
        assert!(apply_configuration(&d, &c).is_err());
        let mut c = configuration_of(&d);
        c.eff_order.remove("stack");
        assert!(apply_configuration(&d, &c).is_err());
    }

    #[test]
    fn reversing_operators_twice_is_identity() {
        let d = bw();
        let mut c = configuration_of(&d);
        c.op_order.reverse();
        let once = apply_configuration(&d, &c).unwrap();
        let mut c2 = configuration_of(&once);
        c2.op_order.reverse();
        assert_eq!(apply_configuration(&once, &c2).unwrap(), d);
    }

    #[test]
    fn decode_rejects_bad_dimension_and_range() {
        let d = bw();
        let mut v = PrecedenceVector::zeros(&d);
        v.values.pop();
        assert!(matches!(
            decode_precedence(&d, &v),
            Err(ConfigError::Dimension {
                expected: 36,
                found: 35
            })
        ));
        assert!(matches!(
            PrecedenceVector::new(layout(&d), vec![1.5; 36]),
            Err(ConfigError::OutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn zeros_decode_alphabetically() {
        let d = bw();
        let c = decode_precedence(&d, &PrecedenceVector::zeros(&d)).unwrap();
        assert_eq!(
            c.pred_order,
            ["clear", "handempty", "holding", "on", "ontable"]
        );
        assert_eq!(c.op_order, ["pick-up", "put-down", "stack", "unstack"]);
        assert_eq!(
            c.eff_order["pick-up"],
            ["holding ?x", "not:clear ?x", "not:handempty", "not:ontable ?x"]
        );
    }

    #[test]
    fn vector_json_shape() {
        let d = bw();
        let v = PrecedenceVector::zeros(&d);
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["layout"][0]["kind"], "predicates");
        assert_eq!(json["layout"][2]["kind"], "pre");
        assert_eq!(json["layout"][2]["owner"], "pick-up");
        let c = serde_json::to_value(configuration_of(&d)).unwrap();
        for k in ["predOrder", "opOrder", "preOrder", "effOrder"] {
            assert!(c.get(k).is_some());
        }
    }
}
