use std::fmt::Write;

use super::model::*;

/// Writes a typed list, grouping consecutive names that share a type.
/// Untyped names that precede typed ones are written as `- object` so they
/// do not pick up the following annotation when read back.
fn typed_list(items: &[TypedName]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < items.len() {
        let ty = &items[i].ty;
        let mut j = i;
        while j < items.len() && &items[j].ty == ty {
            j += 1;
        }
        for item in &items[i..j] {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&item.name);
        }
        match ty {
            Some(t) => write!(out, " - {t}").unwrap(),
            None if j < items.len() => out.push_str(" - object"),
            None => {}
        }
        i = j;
    }
    out
}

fn literal_block(out: &mut String, keyword: &str, lits: &[Literal]) {
    write!(out, "    {keyword} (and").unwrap();
    for l in lits {
        write!(out, "\n      {l}").unwrap();
    }
    out.push_str(")\n");
}

/// Prints a single `(:action ...)` block, indented for inclusion in a domain.
pub fn print_operator(op: &OperatorSchema) -> String {
    let mut out = String::new();
    writeln!(out, "  (:action {}", op.name).unwrap();
    writeln!(out, "    :parameters ({})", typed_list(&op.params)).unwrap();
    literal_block(&mut out, ":precondition", &op.pre);
    literal_block(&mut out, ":effect", &op.eff);
    out.pop();
    out.push_str(")\n");
    out
}

/// Prints a domain in canonical layout. Element order is exactly the stored
/// order; the output is a pure function of the model.
pub fn print_domain(m: &DomainModel) -> String {
    let mut out = String::new();
    writeln!(out, "(define (domain {})", m.name).unwrap();
    if !m.requirements.is_empty() {
        writeln!(out, "  (:requirements {})", m.requirements.join(" ")).unwrap();
    }
    if !m.types.is_empty() {
        writeln!(out, "  (:types {})", typed_list(&m.types)).unwrap();
    }
    if !m.constants.is_empty() {
        writeln!(out, "  (:constants {})", typed_list(&m.constants)).unwrap();
    }
    out.push_str("  (:predicates");
    for p in &m.predicates {
        out.push_str("\n    (");
        out.push_str(&p.name);
        if !p.params.is_empty() {
            write!(out, " {}", typed_list(&p.params)).unwrap();
        }
        out.push(')');
    }
    out.push_str(")\n");
    for op in &m.operators {
        out.push_str(&print_operator(op));
    }
    out.push_str(")\n");
    out
}

pub fn print_problem(p: &ProblemModel) -> String {
    let mut out = String::new();
    writeln!(out, "(define (problem {})", p.name).unwrap();
    writeln!(out, "  (:domain {})", p.domain_name).unwrap();
    if !p.objects.is_empty() {
        writeln!(out, "  (:objects {})", typed_list(&p.objects)).unwrap();
    }
    out.push_str("  (:init");
    for a in &p.init {
        write!(out, "\n    {a}").unwrap();
    }
    out.push_str(")\n  (:goal (and");
    for a in &p.goal {
        write!(out, "\n    {a}").unwrap();
    }
    out.push_str("))\n)\n");
    out
}
