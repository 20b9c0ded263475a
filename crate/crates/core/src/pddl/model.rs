use std::fmt;

/// A name with an optional type annotation: `?x - block`, `a - block`, or a
/// type declaration `crate - surface`. The root type `object` is stored as
/// `None`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypedName {
    pub name: String,
    pub ty: Option<String>,
}

impl TypedName {
    pub fn new(name: impl Into<String>, ty: Option<&str>) -> Self {
        TypedName {
            name: name.into(),
            ty: ty.map(str::to_string),
        }
    }

    pub fn untyped(name: impl Into<String>) -> Self {
        TypedName {
            name: name.into(),
            ty: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<TypedName>,
}

impl PredicateDecl {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// Name of the built-in equality predicate available under `:equality`.
pub const EQUALITY: &str = "=";

/// A possibly negated atom over variables and constants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub predicate: String,
    pub args: Vec<String>,
    pub negated: bool,
}

impl Literal {
    pub fn pos(predicate: impl Into<String>, args: &[&str]) -> Self {
        Literal {
            predicate: predicate.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
            negated: false,
        }
    }

    pub fn neg(predicate: impl Into<String>, args: &[&str]) -> Self {
        Literal {
            negated: true,
            ..Literal::pos(predicate, args)
        }
    }

    pub fn is_equality(&self) -> bool {
        self.predicate == EQUALITY
    }

    /// The same atom with positive polarity.
    pub fn atom(&self) -> Literal {
        Literal {
            negated: false,
            ..self.clone()
        }
    }

    /// Name used for alphabetical tie-breaking and in configuration files:
    /// `pred arg1 arg2`, prefixed with `not:` when negated.
    pub fn canonical_name(&self) -> String {
        let mut s = String::new();
        if self.negated {
            s.push_str("not:");
        }
        s.push_str(&self.predicate);
        for a in &self.args {
            s.push(' ');
            s.push_str(a);
        }
        s
    }

    /// Renames every argument through `f`.
    pub fn map_args(&self, mut f: impl FnMut(&str) -> String) -> Literal {
        Literal {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|a| f(a)).collect(),
            negated: self.negated,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("(not ")?;
        }
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")?;
        if self.negated {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// A lifted STRIPS operator. `eff` keeps negative and positive effects in a
/// single ordered list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OperatorSchema {
    pub name: String,
    pub params: Vec<TypedName>,
    pub pre: Vec<Literal>,
    pub eff: Vec<Literal>,
}

impl OperatorSchema {
    pub fn add_effects(&self) -> impl Iterator<Item = &Literal> {
        self.eff.iter().filter(|l| !l.negated)
    }

    pub fn del_effects(&self) -> impl Iterator<Item = &Literal> {
        self.eff.iter().filter(|l| l.negated)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DomainModel {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: Vec<TypedName>,
    pub constants: Vec<TypedName>,
    pub predicates: Vec<PredicateDecl>,
    pub operators: Vec<OperatorSchema>,
}

impl DomainModel {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn operator(&self, name: &str) -> Option<&OperatorSchema> {
        self.operators.iter().find(|o| o.name == name)
    }

    pub fn operator_index(&self, name: &str) -> Option<usize> {
        self.operators.iter().position(|o| o.name == name)
    }

    pub fn operator_names(&self) -> Vec<&str> {
        self.operators.iter().map(|o| o.name.as_str()).collect()
    }

    pub fn predicate_names(&self) -> Vec<&str> {
        self.predicates.iter().map(|p| p.name.as_str()).collect()
    }

    /// Whether `ty` equals `ancestor` or is declared (transitively) beneath it.
    /// Every type is a subtype of the root `object` (`None`).
    pub fn is_subtype(&self, ty: Option<&str>, ancestor: Option<&str>) -> bool {
        let Some(ancestor) = ancestor else {
            return true;
        };
        let mut current = ty;
        // a cyclic hierarchy is rejected by validation, the bound only guards it
        for _ in 0..=self.types.len() {
            match current {
                Some(t) if t == ancestor => return true,
                Some(t) => {
                    current = self
                        .types
                        .iter()
                        .find(|d| d.name == t)
                        .and_then(|d| d.ty.as_deref());
                }
                None => return false,
            }
        }
        false
    }
}

/// A ground atom of a problem: predicate applied to object names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        Atom {
            predicate: predicate.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProblemModel {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<TypedName>,
    pub init: Vec<Atom>,
    pub goal: Vec<Atom>,
}
