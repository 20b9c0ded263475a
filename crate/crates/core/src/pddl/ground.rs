use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::*;
use super::{check_problem, PddlError};

pub type AtomId = u32;
pub type ActionId = usize;

/// A state is the set of atoms that hold.
pub type State = BTreeSet<AtomId>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub operator: String,
    pub args: Vec<String>,
    /// Preconditions in the operator's listed order.
    pub pre: Vec<AtomId>,
    pub del: Vec<AtomId>,
    pub add: Vec<AtomId>,
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.operator)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone)]
pub struct GroundTask {
    pub atoms: Vec<Atom>,
    atom_index: HashMap<Atom, AtomId>,
    pub actions: Vec<GroundAction>,
    action_index: HashMap<(String, Vec<String>), ActionId>,
    pub init: State,
    pub goal: State,
}

impl GroundTask {
    pub fn atom_id(&self, atom: &Atom) -> Option<AtomId> {
        self.atom_index.get(atom).copied()
    }

    pub fn atom(&self, id: AtomId) -> &Atom {
        &self.atoms[id as usize]
    }

    pub fn action_id(&self, operator: &str, args: &[String]) -> Option<ActionId> {
        self.action_index
            .get(&(operator.to_string(), args.to_vec()))
            .copied()
    }

    /// Converts a state into atoms, independent of atom numbering.
    pub fn state_atoms(&self, s: &State) -> BTreeSet<Atom> {
        s.iter().map(|&id| self.atom(id).clone()).collect()
    }

    pub fn is_goal(&self, s: &State) -> bool {
        self.goal.is_subset(s)
    }

    fn intern(&mut self, atom: Atom) -> AtomId {
        if let Some(&id) = self.atom_index.get(&atom) {
            return id;
        }
        let id = self.atoms.len() as AtomId;
        self.atoms.push(atom.clone());
        self.atom_index.insert(atom, id);
        id
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroundError {
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error("action {action} is not applicable: precondition {missing} does not hold")]
    Inapplicable { action: String, missing: String },
    #[error("unknown action {0}")]
    UnknownAction(String),
    #[error("malformed plan line {line}: {message}")]
    PlanSyntax { line: usize, message: String },
}

/// Objects usable in the task: domain constants followed by problem objects.
fn universe(domain: &DomainModel, problem: &ProblemModel) -> Vec<TypedName> {
    domain
        .constants
        .iter()
        .chain(&problem.objects)
        .cloned()
        .collect()
}

/// Every assignment of objects to `params` that respects their types, in
/// lexicographic order of object declaration.
fn substitutions(
    domain: &DomainModel,
    objects: &[TypedName],
    params: &[TypedName],
) -> Vec<Vec<String>> {
    let candidates: Vec<Vec<&str>> = params
        .iter()
        .map(|p| {
            objects
                .iter()
                .filter(|o| domain.is_subtype(o.ty.as_deref(), p.ty.as_deref()))
                .map(|o| o.name.as_str())
                .collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    for cands in &candidates {
        let mut next = Vec::with_capacity(out.len() * cands.len());
        for prefix in &out {
            for c in cands {
                let mut v: Vec<String> = prefix.clone();
                v.push(c.to_string());
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn bind(lit: &Literal, params: &[TypedName], args: &[String]) -> Atom {
    Atom {
        predicate: lit.predicate.clone(),
        args: lit
            .args
            .iter()
            .map(|a| match params.iter().position(|p| &p.name == a) {
                Some(i) => args[i].clone(),
                None => a.clone(),
            })
            .collect(),
    }
}

/// Equality literals hold statically; returns false when one fails.
fn equalities_hold(op: &OperatorSchema, args: &[String]) -> bool {
    op.pre.iter().filter(|l| l.is_equality()).all(|l| {
        let a = bind(l, &op.params, args);
        (a.args[0] == a.args[1]) != l.negated
    })
}

/// Grounds a problem against its domain: the atom universe holds every
/// type-consistent instantiation of each predicate, and the actions every
/// type-consistent instantiation of each operator whose equality
/// preconditions hold.
pub fn ground_task(domain: &DomainModel, problem: &ProblemModel) -> Result<GroundTask, GroundError> {
    check_problem(domain, problem)?;
    let objects = universe(domain, problem);
    let mut task = GroundTask {
        atoms: Vec::new(),
        atom_index: HashMap::new(),
        actions: Vec::new(),
        action_index: HashMap::new(),
        init: State::new(),
        goal: State::new(),
    };
    for p in &domain.predicates {
        for args in substitutions(domain, &objects, &p.params) {
            task.intern(Atom {
                predicate: p.name.clone(),
                args,
            });
        }
    }
    for op in &domain.operators {
        for args in substitutions(domain, &objects, &op.params) {
            if !equalities_hold(op, &args) {
                continue;
            }
            let mut ids = |lits: &mut dyn Iterator<Item = &Literal>| -> Vec<AtomId> {
                let mut v: Vec<AtomId> = Vec::new();
                for l in lits {
                    let id = task.intern(bind(l, &op.params, &args));
                    if !v.contains(&id) {
                        v.push(id);
                    }
                }
                v
            };
            let pre = ids(&mut op.pre.iter().filter(|l| !l.is_equality()));
            let del = ids(&mut op.del_effects());
            let add = ids(&mut op.add_effects());
            let id = task.actions.len();
            task.action_index.insert((op.name.clone(), args.clone()), id);
            task.actions.push(GroundAction {
                operator: op.name.clone(),
                args,
                pre,
                del,
                add,
            });
        }
    }
    for a in &problem.init {
        let id = task.intern(a.clone());
        task.init.insert(id);
    }
    for a in &problem.goal {
        let id = task.intern(a.clone());
        task.goal.insert(id);
    }
    Ok(task)
}

/// `(s \ del(a)) ∪ add(a)`, provided every precondition of `a` holds in `s`.
pub fn apply_action(task: &GroundTask, s: &State, action: ActionId) -> Result<State, GroundError> {
    let a = &task.actions[action];
    if let Some(&missing) = a.pre.iter().find(|p| !s.contains(p)) {
        return Err(GroundError::Inapplicable {
            action: a.to_string(),
            missing: task.atom(missing).to_string(),
        });
    }
    let mut next = s.clone();
    for d in &a.del {
        next.remove(d);
    }
    next.extend(a.add.iter().copied());
    Ok(next)
}

/// One step of a plan: operator name and object arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlanStep {
    pub operator: String,
    pub args: Vec<String>,
}

impl PlanStep {
    pub fn new(operator: &str, args: &[&str]) -> Self {
        PlanStep {
            operator: operator.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.operator)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// Reads a plan in the usual IPC layout: one `(op arg...)` per line, with an
/// optional `N:` time prefix and `[d]` duration suffix; `;` starts a comment.
pub fn parse_plan(text: &str) -> Result<Vec<PlanStep>, GroundError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: &str| GroundError::PlanSyntax {
            line: i + 1,
            message: message.to_string(),
        };
        let open = line.find('(').ok_or_else(|| err("expected '('"))?;
        let close = line.rfind(')').ok_or_else(|| err("expected ')'"))?;
        if close < open {
            return Err(err("unbalanced parentheses"));
        }
        let mut words = line[open + 1..close]
            .split_whitespace()
            .map(str::to_lowercase);
        let operator = words.next().ok_or_else(|| err("empty action"))?;
        steps.push(PlanStep {
            operator,
            args: words.collect(),
        });
    }
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub valid: bool,
    /// 1-based index of the first inapplicable step.
    pub fail_step: Option<usize>,
    pub fail_reason: Option<String>,
    pub plan_length: usize,
}

impl ValidationReport {
    fn ok(len: usize) -> Self {
        ValidationReport {
            valid: true,
            fail_step: None,
            fail_reason: None,
            plan_length: len,
        }
    }

    fn failed(len: usize, step: Option<usize>, reason: String) -> Self {
        ValidationReport {
            valid: false,
            fail_step: step,
            fail_reason: Some(reason),
            plan_length: len,
        }
    }
}

/// Simulates `plan` from the initial state of a grounded task.
pub fn validate_plan(task: &GroundTask, plan: &[PlanStep]) -> Result<ValidationReport, GroundError> {
    let ids = plan
        .iter()
        .map(|s| {
            task.action_id(&s.operator, &s.args)
                .ok_or_else(|| GroundError::UnknownAction(s.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut state = task.init.clone();
    for (i, &id) in ids.iter().enumerate() {
        match apply_action(task, &state, id) {
            Ok(next) => state = next,
            Err(e) => return Ok(ValidationReport::failed(plan.len(), Some(i + 1), e.to_string())),
        }
    }
    match task.goal.iter().find(|g| !state.contains(g)) {
        None => Ok(ValidationReport::ok(plan.len())),
        Some(&g) => Ok(ValidationReport::failed(
            plan.len(),
            None,
            format!("goal {} not satisfied", task.atom(g)),
        )),
    }
}

/// Validates a plan by instantiating only the operators it uses. Suited to
/// problems whose full grounding would be large.
pub fn validate_plan_lifted(
    domain: &DomainModel,
    problem: &ProblemModel,
    plan: &[PlanStep],
) -> Result<ValidationReport, GroundError> {
    check_problem(domain, problem)?;
    let objects = universe(domain, problem);
    let mut state: BTreeSet<Atom> = problem.init.iter().cloned().collect();
    for (i, step) in plan.iter().enumerate() {
        let unknown = || GroundError::UnknownAction(step.to_string());
        let op = domain.operator(&step.operator).ok_or_else(unknown)?;
        if op.params.len() != step.args.len() {
            return Err(unknown());
        }
        for (p, a) in op.params.iter().zip(&step.args) {
            let obj = objects.iter().find(|o| &o.name == a).ok_or_else(unknown)?;
            if !domain.is_subtype(obj.ty.as_deref(), p.ty.as_deref()) {
                return Err(unknown());
            }
        }
        let fail = |missing: String| {
            Ok(ValidationReport::failed(
                plan.len(),
                Some(i + 1),
                format!("action {step} is not applicable: precondition {missing} does not hold"),
            ))
        };
        for l in &op.pre {
            let atom = bind(l, &op.params, &step.args);
            let holds = if l.is_equality() {
                (atom.args[0] == atom.args[1]) != l.negated
            } else {
                state.contains(&atom)
            };
            if !holds {
                return fail(l.map_args(|a| bind_arg(a, &op.params, &step.args)).to_string());
            }
        }
        for d in op.del_effects() {
            state.remove(&bind(d, &op.params, &step.args));
        }
        for a in op.add_effects() {
            state.insert(bind(a, &op.params, &step.args));
        }
    }
    match problem.goal.iter().find(|g| !state.contains(g)) {
        None => Ok(ValidationReport::ok(plan.len())),
        Some(g) => Ok(ValidationReport::failed(
            plan.len(),
            None,
            format!("goal {g} not satisfied"),
        )),
    }
}

fn bind_arg(a: &str, params: &[TypedName], args: &[String]) -> String {
    params
        .iter()
        .position(|p| p.name == a)
        .map_or_else(|| a.to_string(), |i| args[i].clone())
}
