use std::collections::HashSet;

use super::model::*;
use super::PddlError;
use crate::sexpr::{self, Pos, SExpr};

/// Requirement tags accepted by the parser. Anything else is rejected.
pub const SUPPORTED_REQUIREMENTS: &[&str] = &[":strips", ":typing", ":equality"];

const UNSUPPORTED_FORMULAS: &[&str] = &[
    "or", "imply", "exists", "forall", "when", "increase", "decrease", "assign", "scale-up",
    "scale-down",
];

fn syntax(pos: Pos, message: impl Into<String>) -> PddlError {
    PddlError::Syntax {
        pos,
        message: message.into(),
    }
}

fn read(text: &str) -> Result<SExpr, PddlError> {
    sexpr::read(text).map_err(|e| syntax(e.pos, e.message))
}

fn list<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr], PddlError> {
    e.as_list()
        .ok_or_else(|| syntax(e.pos(), format!("expected {what}")))
}

fn atom<'a>(e: &'a SExpr, what: &str) -> Result<&'a str, PddlError> {
    e.as_atom()
        .ok_or_else(|| syntax(e.pos(), format!("expected {what}")))
}

/// Parses `(define (<kind> NAME) ...)` and returns the name and the sections.
fn header<'a>(root: &'a SExpr, kind: &str) -> Result<(String, &'a [SExpr]), PddlError> {
    let items = list(root, "(define ...)")?;
    match items.first().and_then(SExpr::as_atom) {
        Some("define") => {}
        _ => return Err(syntax(root.pos(), "expected (define ...)")),
    }
    let decl = items
        .get(1)
        .ok_or_else(|| syntax(root.pos(), format!("missing ({kind} <name>)")))?;
    let decl_items = list(decl, &format!("({kind} <name>)"))?;
    match decl_items {
        [head, name] if head.as_atom() == Some(kind) => {
            Ok((atom(name, "a name")?.to_string(), &items[2..]))
        }
        _ => Err(syntax(decl.pos(), format!("expected ({kind} <name>)"))),
    }
}

fn normalize_type(ty: &str) -> Option<String> {
    (ty != "object").then(|| ty.to_string())
}

/// Parses `a b - t c - u d` style lists. Names without a trailing type get
/// the root type.
fn typed_list(items: &[SExpr], variables: bool) -> Result<Vec<TypedName>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut iter = items.iter();
    while let Some(item) = iter.next() {
        let name = match item {
            SExpr::Atom(s, _) => s,
            SExpr::List(..) => return Err(syntax(item.pos(), "expected a name")),
        };
        if name == "-" {
            let ty = iter
                .next()
                .ok_or_else(|| syntax(item.pos(), "missing type after '-'"))?;
            let ty = match ty {
                SExpr::Atom(t, _) => t,
                SExpr::List(..) => {
                    return Err(PddlError::Unsupported {
                        what: "either".into(),
                        pos: ty.pos(),
                    })
                }
            };
            if pending.is_empty() {
                return Err(syntax(item.pos(), "type annotation without names"));
            }
            let ty = normalize_type(ty);
            out.extend(pending.drain(..).map(|n| TypedName { name: n, ty: ty.clone() }));
        } else {
            if variables != name.starts_with('?') {
                let msg = if variables {
                    format!("expected a variable, found `{name}`")
                } else {
                    format!("unexpected variable `{name}`")
                };
                return Err(syntax(item.pos(), msg));
            }
            pending.push(name.clone());
        }
    }
    out.extend(pending.into_iter().map(TypedName::untyped));
    Ok(out)
}

fn literal_from(items: &[SExpr], pos: Pos) -> Result<Literal, PddlError> {
    let (head, rest) = items
        .split_first()
        .ok_or_else(|| syntax(pos, "empty literal"))?;
    let predicate = atom(head, "a predicate name")?;
    if UNSUPPORTED_FORMULAS.contains(&predicate) {
        return Err(PddlError::Unsupported {
            what: predicate.into(),
            pos,
        });
    }
    let args = rest
        .iter()
        .map(|a| atom(a, "a term").map(str::to_string))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Literal {
        predicate: predicate.to_string(),
        args,
        negated: false,
    })
}

fn push_unique(out: &mut Vec<Literal>, lit: Literal, operator: &str, section: &str) {
    if out.contains(&lit) {
        log::warn!("operator `{operator}`: duplicate {section} literal {lit} dropped");
    } else {
        out.push(lit);
    }
}

fn precondition(e: &SExpr, out: &mut Vec<Literal>, operator: &str) -> Result<(), PddlError> {
    let items = list(e, "a precondition formula")?;
    match e.head() {
        None if items.is_empty() => Ok(()),
        Some("and") => items[1..]
            .iter()
            .try_for_each(|c| precondition(c, out, operator)),
        Some("not") => {
            let inner = match items {
                [_, inner] => inner,
                _ => return Err(syntax(e.pos(), "malformed (not ...)")),
            };
            let lit = literal_from(list(inner, "an atom")?, inner.pos())?;
            if !lit.is_equality() {
                return Err(PddlError::Unsupported {
                    what: "negative precondition".into(),
                    pos: e.pos(),
                });
            }
            push_unique(out, Literal { negated: true, ..lit }, operator, "precondition");
            Ok(())
        }
        _ => {
            let lit = literal_from(items, e.pos())?;
            push_unique(out, lit, operator, "precondition");
            Ok(())
        }
    }
}

fn effect(e: &SExpr, out: &mut Vec<Literal>, operator: &str) -> Result<(), PddlError> {
    let items = list(e, "an effect formula")?;
    match e.head() {
        None if items.is_empty() => Ok(()),
        Some("and") => items[1..].iter().try_for_each(|c| effect(c, out, operator)),
        Some("not") => {
            let inner = match items {
                [_, inner] => inner,
                _ => return Err(syntax(e.pos(), "malformed (not ...)")),
            };
            let lit = literal_from(list(inner, "an atom")?, inner.pos())?;
            push_unique(out, Literal { negated: true, ..lit }, operator, "effect");
            Ok(())
        }
        _ => {
            let lit = literal_from(items, e.pos())?;
            push_unique(out, lit, operator, "effect");
            Ok(())
        }
    }
}

fn action(items: &[SExpr], pos: Pos) -> Result<OperatorSchema, PddlError> {
    let name = items
        .get(1)
        .ok_or_else(|| syntax(pos, "missing action name"))
        .and_then(|n| atom(n, "an action name"))?
        .to_string();
    let mut op = OperatorSchema {
        name,
        params: Vec::new(),
        pre: Vec::new(),
        eff: Vec::new(),
    };
    let mut rest = items[2..].iter();
    while let Some(key) = rest.next() {
        let key_name = atom(key, "an action keyword")?;
        let value = rest
            .next()
            .ok_or_else(|| syntax(key.pos(), format!("missing value for {key_name}")))?;
        match key_name {
            ":parameters" => op.params = typed_list(list(value, "a parameter list")?, true)?,
            ":precondition" => precondition(value, &mut op.pre, &op.name.clone())?,
            ":effect" => effect(value, &mut op.eff, &op.name.clone())?,
            other => {
                return Err(PddlError::Unsupported {
                    what: other.into(),
                    pos: key.pos(),
                })
            }
        }
    }
    Ok(op)
}

/// Parses a domain file, keeping every element in textual order.
pub fn parse_domain(text: &str) -> Result<DomainModel, PddlError> {
    let root = read(text)?;
    let (name, sections) = header(&root, "domain")?;
    let mut model = DomainModel {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        operators: Vec::new(),
    };
    for section in sections {
        let items = list(section, "a domain section")?;
        match section.head() {
            Some(":requirements") => {
                for r in &items[1..] {
                    let tag = atom(r, "a requirement tag")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&tag) {
                        return Err(PddlError::UnsupportedRequirement {
                            tag: tag.into(),
                            pos: r.pos(),
                        });
                    }
                    model.requirements.push(tag.to_string());
                }
            }
            Some(":types") => model.types.extend(typed_list(&items[1..], false)?),
            Some(":constants") => model.constants.extend(typed_list(&items[1..], false)?),
            Some(":predicates") => {
                for p in &items[1..] {
                    let decl = list(p, "a predicate declaration")?;
                    let (head, params) = decl
                        .split_first()
                        .ok_or_else(|| syntax(p.pos(), "empty predicate declaration"))?;
                    model.predicates.push(PredicateDecl {
                        name: atom(head, "a predicate name")?.to_string(),
                        params: typed_list(params, true)?,
                    });
                }
            }
            Some(":action") => model.operators.push(action(items, section.pos())?),
            Some(other) => {
                return Err(PddlError::Unsupported {
                    what: other.into(),
                    pos: section.pos(),
                })
            }
            None => return Err(syntax(section.pos(), "expected a section keyword")),
        }
    }
    validate_domain(&model)?;
    Ok(model)
}

fn ensure_unique<'a>(
    what: &'static str,
    names: impl IntoIterator<Item = &'a str>,
) -> Result<(), PddlError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(PddlError::Duplicate {
                what,
                name: n.to_string(),
            });
        }
    }
    Ok(())
}

fn ensure_type(model: &DomainModel, ty: &Option<String>) -> Result<(), PddlError> {
    match ty {
        Some(t) if !model.types.iter().any(|d| &d.name == t) => {
            Err(PddlError::UndeclaredType { name: t.clone() })
        }
        _ => Ok(()),
    }
}

fn check_literal(
    model: &DomainModel,
    lit: &Literal,
    context: &str,
    term_ok: impl Fn(&str) -> bool,
    term_err: impl Fn(&str) -> PddlError,
) -> Result<(), PddlError> {
    let expected = if lit.is_equality() {
        2
    } else {
        model
            .predicate(&lit.predicate)
            .ok_or_else(|| PddlError::UndeclaredPredicate {
                name: lit.predicate.clone(),
                context: context.to_string(),
            })?
            .arity()
    };
    if lit.args.len() != expected {
        return Err(PddlError::Arity {
            name: lit.predicate.clone(),
            expected,
            found: lit.args.len(),
            context: context.to_string(),
        });
    }
    for a in &lit.args {
        if !term_ok(a) {
            return Err(term_err(a));
        }
    }
    Ok(())
}

pub(crate) fn validate_domain(model: &DomainModel) -> Result<(), PddlError> {
    ensure_unique("type", model.types.iter().map(|t| t.name.as_str()))?;
    for t in &model.types {
        ensure_type(model, &t.ty)?;
        // a type must not be its own ancestor
        if let Some(parent) = &t.ty {
            if model.is_subtype(Some(parent), Some(&t.name)) {
                return Err(PddlError::Duplicate {
                    what: "type in a cyclic hierarchy",
                    name: t.name.clone(),
                });
            }
        }
    }
    ensure_unique("constant", model.constants.iter().map(|c| c.name.as_str()))?;
    for c in &model.constants {
        ensure_type(model, &c.ty)?;
    }
    ensure_unique("predicate", model.predicates.iter().map(|p| p.name.as_str()))?;
    for p in &model.predicates {
        ensure_unique("predicate variable", p.params.iter().map(|v| v.name.as_str()))?;
        for v in &p.params {
            ensure_type(model, &v.ty)?;
        }
    }
    ensure_unique("operator", model.operators.iter().map(|o| o.name.as_str()))?;
    for op in &model.operators {
        ensure_unique("operator parameter", op.params.iter().map(|v| v.name.as_str()))?;
        for v in &op.params {
            ensure_type(model, &v.ty)?;
        }
        let context = format!("operator `{}`", op.name);
        let term_ok = |t: &str| {
            if t.starts_with('?') {
                op.params.iter().any(|p| p.name == t)
            } else {
                model.constants.iter().any(|c| c.name == t)
            }
        };
        let term_err = |t: &str| {
            if t.starts_with('?') {
                PddlError::UndeclaredVariable {
                    name: t.to_string(),
                    operator: op.name.clone(),
                }
            } else {
                PddlError::UndeclaredObject {
                    name: t.to_string(),
                    context: context.clone(),
                }
            }
        };
        for lit in op.pre.iter().chain(&op.eff) {
            check_literal(model, lit, &context, term_ok, term_err)?;
        }
        if let Some(lit) = op.eff.iter().find(|l| l.is_equality()) {
            return Err(PddlError::Unsupported {
                what: format!("equality effect {lit} in `{}`", op.name),
                pos: Pos { line: 1, col: 1 },
            });
        }
        for del in op.del_effects() {
            if op.eff.contains(&del.atom()) {
                log::warn!(
                    "operator `{}` both deletes and adds {}",
                    op.name,
                    del.atom()
                );
            }
        }
    }
    Ok(())
}

fn ground_atom(e: &SExpr) -> Result<Atom, PddlError> {
    let items = list(e, "a ground atom")?;
    if e.head() == Some("not") {
        return Err(PddlError::Unsupported {
            what: "negative literal".into(),
            pos: e.pos(),
        });
    }
    let lit = literal_from(items, e.pos())?;
    if let Some(v) = lit.args.iter().find(|a| a.starts_with('?')) {
        return Err(syntax(e.pos(), format!("variable `{v}` in a ground atom")));
    }
    Ok(Atom {
        predicate: lit.predicate,
        args: lit.args,
    })
}

fn goal(e: &SExpr, out: &mut Vec<Atom>) -> Result<(), PddlError> {
    let items = list(e, "a goal formula")?;
    match e.head() {
        None if items.is_empty() => Ok(()),
        Some("and") => items[1..].iter().try_for_each(|c| goal(c, out)),
        _ => {
            let a = ground_atom(e)?;
            if !out.contains(&a) {
                out.push(a);
            }
            Ok(())
        }
    }
}

/// Parses a problem file. Checks that need the domain (predicate arity,
/// declared objects) are done by [`check_problem`].
pub fn parse_problem(text: &str) -> Result<ProblemModel, PddlError> {
    let root = read(text)?;
    let (name, sections) = header(&root, "problem")?;
    let mut problem = ProblemModel {
        name,
        domain_name: String::new(),
        objects: Vec::new(),
        init: Vec::new(),
        goal: Vec::new(),
    };
    for section in sections {
        let items = list(section, "a problem section")?;
        match section.head() {
            Some(":domain") => match items {
                [_, d] => problem.domain_name = atom(d, "a domain name")?.to_string(),
                _ => return Err(syntax(section.pos(), "expected (:domain <name>)")),
            },
            Some(":requirements") => {
                for r in &items[1..] {
                    let tag = atom(r, "a requirement tag")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&tag) {
                        return Err(PddlError::UnsupportedRequirement {
                            tag: tag.into(),
                            pos: r.pos(),
                        });
                    }
                }
            }
            Some(":objects") => problem.objects.extend(typed_list(&items[1..], false)?),
            Some(":init") => {
                for a in &items[1..] {
                    let a = ground_atom(a)?;
                    if !problem.init.contains(&a) {
                        problem.init.push(a);
                    }
                }
            }
            Some(":goal") => match items {
                [_, g] => goal(g, &mut problem.goal)?,
                _ => return Err(syntax(section.pos(), "expected (:goal <formula>)")),
            },
            Some(other) => {
                return Err(PddlError::Unsupported {
                    what: other.into(),
                    pos: section.pos(),
                })
            }
            None => return Err(syntax(section.pos(), "expected a section keyword")),
        }
    }
    if problem.domain_name.is_empty() {
        return Err(syntax(root.pos(), "missing (:domain <name>)"));
    }
    ensure_unique("object", problem.objects.iter().map(|o| o.name.as_str()))?;
    if problem.goal.is_empty() {
        return Err(PddlError::EmptyGoal);
    }
    Ok(problem)
}

/// Checks a problem against its domain: matching names, declared types,
/// predicates with correct arity, and objects (or domain constants) in every
/// atom.
pub fn check_problem(domain: &DomainModel, problem: &ProblemModel) -> Result<(), PddlError> {
    if domain.name != problem.domain_name {
        return Err(PddlError::DomainMismatch {
            expected: domain.name.clone(),
            found: problem.domain_name.clone(),
        });
    }
    for o in &problem.objects {
        ensure_type(domain, &o.ty)?;
        if domain.constants.iter().any(|c| c.name == o.name) {
            return Err(PddlError::Duplicate {
                what: "object (also a domain constant)",
                name: o.name.clone(),
            });
        }
    }
    if problem.goal.is_empty() {
        return Err(PddlError::EmptyGoal);
    }
    let declared = |t: &str| {
        problem.objects.iter().any(|o| o.name == t) || domain.constants.iter().any(|c| c.name == t)
    };
    for (section, atoms) in [("init", &problem.init), ("goal", &problem.goal)] {
        for a in atoms {
            let lit = Literal {
                predicate: a.predicate.clone(),
                args: a.args.clone(),
                negated: false,
            };
            if lit.is_equality() {
                return Err(PddlError::Unsupported {
                    what: format!("equality atom in {section}"),
                    pos: Pos { line: 1, col: 1 },
                });
            }
            check_literal(domain, &lit, section, declared, |t| {
                PddlError::UndeclaredObject {
                    name: t.to_string(),
                    context: section.to_string(),
                }
            })?;
        }
    }
    Ok(())
}
