//! Macro-operator composition and placement.
//!
//! A macro is assembled from a sequence of primitive operators whose
//! parameters are unified through shared variable names. For a pair
//! `o_i, o_j` the macro has
//!
//! ```text
//! pre  = pre(o_i) ∪ (pre(o_j) \ add(o_i))
//! del  = (del(o_i) \ add(o_j)) ∪ del(o_j)
//! add  = (add(o_i) \ del(o_j)) ∪ add(o_j)
//! ```
//!
//! and is only defined when `o_i` deletes nothing that `o_j` requires.
//! Longer macros fold this from the left.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{DomainModel, Literal, OperatorSchema, TypedName};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MacroError {
    #[error("a macro needs at least two steps, found {0}")]
    TooShort(usize),
    #[error("operator `{0}` is not in the domain")]
    UnknownOperator(String),
    #[error("binding for step {step} (`{operator}`) does not cover parameter `{param}`")]
    IncompleteBinding {
        step: usize,
        operator: String,
        param: String,
    },
    #[error("binding for step {step} (`{operator}`) names `{param}`, which is not a parameter")]
    UnknownParameter {
        step: usize,
        operator: String,
        param: String,
    },
    #[error("variable `{var}` is bound to parameters of different types ({a} and {b})")]
    TypeConflict { var: String, a: String, b: String },
    #[error("step {step}: the preceding steps delete {literal}, which `{operator}` requires")]
    Conflict {
        step: usize,
        operator: String,
        literal: String,
    },
    #[error("an operator named `{0}` already exists")]
    DuplicateName(String),
    #[error("position {position} is outside 1..={max}")]
    PositionOutOfRange { position: usize, max: usize },
    #[error("encapsulated operator `{0}` is not in the model")]
    AbsentOperator(String),
    #[error("between slot {slot} does not exist; the model has {slots} slot(s) between the encapsulated operators")]
    NoBetweenSlot { slot: usize, slots: usize },
    #[error("invalid placement `{0}`")]
    BadPlacement(String),
}

/// One step of a recipe: an operator and the map from its parameters to the
/// macro's shared variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeStep {
    pub op: String,
    pub bind: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MacroRecipe {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macro_name: Option<String>,
    pub steps: Vec<RecipeStep>,
}

fn variable(name: &str) -> String {
    let lower = name.to_lowercase();
    if lower.starts_with('?') {
        lower
    } else {
        format!("?{lower}")
    }
}

impl MacroRecipe {
    /// Lowercases names and adds the `?` prefix where a binding omits it.
    pub fn normalized(&self) -> MacroRecipe {
        MacroRecipe {
            macro_name: self.macro_name.as_ref().map(|n| n.to_lowercase()),
            steps: self
                .steps
                .iter()
                .map(|s| RecipeStep {
                    op: s.op.to_lowercase(),
                    bind: s
                        .bind
                        .iter()
                        .map(|(k, v)| (variable(k), variable(v)))
                        .collect(),
                })
                .collect(),
        }
    }

    /// `m-<step1>-<step2>-...` unless the recipe names the macro.
    pub fn name(&self) -> String {
        self.macro_name.clone().unwrap_or_else(|| {
            let ops: Vec<&str> = self.steps.iter().map(|s| s.op.as_str()).collect();
            format!("m-{}", ops.join("-")).to_lowercase()
        })
    }
}

fn merge_type(
    var: &str,
    a: &Option<String>,
    b: &Option<String>,
) -> Result<Option<String>, MacroError> {
    match (a, b) {
        (Some(x), Some(y)) if x != y => Err(MacroError::TypeConflict {
            var: var.to_string(),
            a: x.clone(),
            b: y.clone(),
        }),
        (Some(x), _) | (None, Some(x)) => Ok(Some(x.clone())),
        (None, None) => Ok(None),
    }
}

fn add_params(params: &mut Vec<TypedName>, new: &[TypedName]) -> Result<(), MacroError> {
    for p in new {
        match params.iter_mut().find(|q| q.name == p.name) {
            Some(q) => q.ty = merge_type(&p.name, &q.ty, &p.ty)?,
            None => params.push(p.clone()),
        }
    }
    Ok(())
}

/// Renames an operator's parameters through `bind`, which must be total.
fn rename(
    op: &OperatorSchema,
    bind: &BTreeMap<String, String>,
    step: usize,
) -> Result<OperatorSchema, MacroError> {
    if let Some(extra) = bind.keys().find(|k| !op.params.iter().any(|p| &p.name == *k)) {
        return Err(MacroError::UnknownParameter {
            step,
            operator: op.name.clone(),
            param: extra.clone(),
        });
    }
    let mut params = Vec::new();
    for p in &op.params {
        let var = bind.get(&p.name).ok_or_else(|| MacroError::IncompleteBinding {
            step,
            operator: op.name.clone(),
            param: p.name.clone(),
        })?;
        add_params(&mut params, &[TypedName {
            name: var.clone(),
            ty: p.ty.clone(),
        }])?;
    }
    let map = |a: &str| bind.get(a).cloned().unwrap_or_else(|| a.to_string());
    let mut pre: Vec<Literal> = Vec::new();
    for l in &op.pre {
        let l = l.map_args(map);
        if !pre.contains(&l) {
            pre.push(l);
        }
    }
    let mut eff: Vec<Literal> = Vec::new();
    for l in &op.eff {
        let l = l.map_args(map);
        if !eff.contains(&l) {
            eff.push(l);
        }
    }
    Ok(OperatorSchema {
        name: op.name.clone(),
        params,
        pre,
        eff,
    })
}

fn push_new(list: &mut Vec<Literal>, l: &Literal) {
    if !list.contains(l) {
        list.push(l.clone());
    }
}

/// Composes two operators whose variables are already unified.
fn compose_renamed(
    first: &OperatorSchema,
    second: &OperatorSchema,
    name: &str,
    step: usize,
) -> Result<OperatorSchema, MacroError> {
    let adds = |o: &OperatorSchema| o.add_effects().cloned().collect::<Vec<_>>();
    let dels = |o: &OperatorSchema| o.del_effects().map(Literal::atom).collect::<Vec<_>>();
    let (first_add, first_del) = (adds(first), dels(first));
    let (second_add, second_del) = (adds(second), dels(second));

    if let Some(l) = second
        .pre
        .iter()
        .find(|l| !l.is_equality() && first_del.contains(l))
    {
        return Err(MacroError::Conflict {
            step,
            operator: second.name.clone(),
            literal: l.to_string(),
        });
    }

    let mut pre = first.pre.clone();
    for l in second.pre.iter().filter(|l| !first_add.contains(l)) {
        push_new(&mut pre, l);
    }

    let mut eff = Vec::new();
    for l in &first.eff {
        let survives = if l.negated {
            !second_add.contains(&l.atom())
        } else {
            !second_del.contains(l)
        };
        if survives {
            push_new(&mut eff, l);
        }
    }
    for l in &second.eff {
        push_new(&mut eff, l);
    }

    let mut params = first.params.clone();
    add_params(&mut params, &second.params)?;
    Ok(OperatorSchema {
        name: name.to_string(),
        params,
        pre,
        eff,
    })
}

/// Composes `first` then `second`, unified through their bindings.
pub fn compose_pair(
    first: &OperatorSchema,
    bind_first: &BTreeMap<String, String>,
    second: &OperatorSchema,
    bind_second: &BTreeMap<String, String>,
    name: &str,
) -> Result<OperatorSchema, MacroError> {
    let a = rename(first, bind_first, 1)?;
    let b = rename(second, bind_second, 2)?;
    compose_renamed(&a, &b, name, 2)
}

/// Left fold of pairwise composition over the recipe's steps.
pub fn compose_chain(recipe: &MacroRecipe, d: &DomainModel) -> Result<OperatorSchema, MacroError> {
    let recipe = recipe.normalized();
    if recipe.steps.len() < 2 {
        return Err(MacroError::TooShort(recipe.steps.len()));
    }
    let name = recipe.name();
    let mut renamed = recipe.steps.iter().enumerate().map(|(i, s)| {
        let op = d
            .operator(&s.op)
            .ok_or_else(|| MacroError::UnknownOperator(s.op.clone()))?;
        rename(op, &s.bind, i + 1)
    });
    let mut acc = renamed.next().unwrap()?;
    for (i, next) in renamed.enumerate() {
        acc = compose_renamed(&acc, &next?, &name, i + 2)?;
    }
    Ok(acc)
}

/// Inserts `macro_op` so that it becomes operator number `position`
/// (1-based, `1..=n+1`). Other operators keep their relative order.
pub fn insert_at(
    d: &DomainModel,
    macro_op: &OperatorSchema,
    position: usize,
) -> Result<DomainModel, MacroError> {
    let max = d.operators.len() + 1;
    if position == 0 || position > max {
        return Err(MacroError::PositionOutOfRange { position, max });
    }
    if d.operator(&macro_op.name).is_some() {
        return Err(MacroError::DuplicateName(macro_op.name.clone()));
    }
    let mut out = d.clone();
    out.operators.insert(position - 1, macro_op.clone());
    Ok(out)
}

/// Removes the operator called `name`.
pub fn remove_operator(d: &DomainModel, name: &str) -> Result<DomainModel, MacroError> {
    let idx = d
        .operator_index(name)
        .ok_or_else(|| MacroError::UnknownOperator(name.to_string()))?;
    let mut out = d.clone();
    out.operators.remove(idx);
    Ok(out)
}

/// The `n + 1` extended models, the macro at position 1 through `n + 1`.
pub fn enumerate_positions(
    d: &DomainModel,
    macro_op: &OperatorSchema,
) -> Result<Vec<DomainModel>, MacroError> {
    (1..=d.operators.len() + 1)
        .map(|p| insert_at(d, macro_op, p))
        .collect()
}

/// Where to list a macro in the extended model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Explicit 1-based position.
    Index(usize),
    End,
    Top,
    /// Immediately before the recipe's first encapsulated operator.
    BeforeFirst,
    /// Immediately after the recipe's first encapsulated operator.
    AfterFirst,
    /// The k-th (1-based) slot strictly between the first-listed and
    /// last-listed encapsulated operators.
    Between(usize),
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placement::Index(i) => write!(f, "{i}"),
            Placement::End => f.write_str("end"),
            Placement::Top => f.write_str("top"),
            Placement::BeforeFirst => f.write_str("before-first"),
            Placement::AfterFirst => f.write_str("after-first"),
            Placement::Between(k) => write!(f, "between:{k}"),
        }
    }
}

impl FromStr for Placement {
    type Err = MacroError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MacroError::BadPlacement(s.to_string());
        match s.to_lowercase().as_str() {
            "end" => Ok(Placement::End),
            "top" => Ok(Placement::Top),
            "before-first" | "before_first" => Ok(Placement::BeforeFirst),
            "after-first" | "after_first" => Ok(Placement::AfterFirst),
            other => {
                if let Some(k) = other.strip_prefix("between:") {
                    k.parse().map(Placement::Between).map_err(|_| bad())
                } else {
                    other.parse().map(Placement::Index).map_err(|_| bad())
                }
            }
        }
    }
}

/// Resolves a placement to a concrete 1-based position in `d`.
pub fn resolve_position(
    d: &DomainModel,
    recipe: &MacroRecipe,
    placement: Placement,
) -> Result<usize, MacroError> {
    let recipe = recipe.normalized();
    let index_of = |op: &str| {
        d.operator_index(op)
            .ok_or_else(|| MacroError::AbsentOperator(op.to_string()))
    };
    let first = recipe
        .steps
        .first()
        .map(|s| s.op.as_str())
        .ok_or(MacroError::TooShort(0))?;
    match placement {
        Placement::Index(i) => Ok(i),
        Placement::End => Ok(d.operators.len() + 1),
        Placement::Top => Ok(1),
        Placement::BeforeFirst => Ok(index_of(first)? + 1),
        Placement::AfterFirst => Ok(index_of(first)? + 2),
        Placement::Between(slot) => {
            let indices = recipe
                .steps
                .iter()
                .map(|s| index_of(&s.op))
                .collect::<Result<Vec<_>, _>>()?;
            let lo = *indices.iter().min().unwrap();
            let hi = *indices.iter().max().unwrap();
            let slots = hi - lo;
            if slot == 0 || slot > slots {
                return Err(MacroError::NoBetweenSlot { slot, slots });
            }
            Ok(lo + 1 + slot)
        }
    }
}

/// Composes the recipe against `d` and inserts the macro at `placement`.
pub fn place(
    d: &DomainModel,
    recipe: &MacroRecipe,
    placement: Placement,
) -> Result<DomainModel, MacroError> {
    let macro_op = compose_chain(recipe, d)?;
    let position = resolve_position(d, recipe, placement)?;
    insert_at(d, &macro_op, position)
}

/// Places several macros in recipe order; each placement is resolved
/// against the model extended by the previous macros.
pub fn place_all(
    d: &DomainModel,
    recipes: &[(MacroRecipe, Placement)],
) -> Result<DomainModel, MacroError> {
    recipes
        .iter()
        .try_fold(d.clone(), |model, (recipe, placement)| {
            place(&model, recipe, *placement)
        })
}
