//! STRIPS subset of PDDL: domain and problem models, parser, canonical printer.

mod parse;
mod print;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_domain, parse_problem, PddlError};
pub use print::{print_domain, print_problem};

use crate::sexpr::SExpr;

/// A predicate applied to an ordered argument list.
///
/// Ground atoms carry object names; atoms inside action schemas carry
/// `?`-prefixed variables. Everything is lowercased on construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<P, I, S>(predicate: P, args: I) -> Self
    where
        P: AsRef<str>,
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Atom {
            predicate: predicate.as_ref().to_lowercase(),
            args: args.into_iter().map(|a| a.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn nullary(predicate: &str) -> Self {
        Atom::new(predicate, std::iter::empty::<&str>())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// Substitute variables according to `binding`; unbound args are kept.
    pub fn ground(&self, binding: &BTreeMap<&str, &str>) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|a| binding.get(a.as_str()).map_or_else(|| a.clone(), |o| o.to_string()))
                .collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for arg in &self.args {
            write!(f, " {arg}")?;
        }
        f.write_str(")")
    }
}

pub type AtomSet = BTreeSet<Atom>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<String>,
    pub preconditions: AtomSet,
    pub add_effects: AtomSet,
    pub del_effects: AtomSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainModel {
    pub name: String,
    pub requirements: Vec<String>,
    /// Predicate name to arity.
    pub predicates: BTreeMap<String, usize>,
    pub actions: Vec<ActionSchema>,
    /// Sections outside the STRIPS subset, kept verbatim and otherwise ignored.
    pub extra_sections: Vec<String>,
}

impl DomainModel {
    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Object {
    pub name: String,
    /// Type tag from a typed declaration; semantically inert.
    pub type_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemModel {
    pub problem_name: String,
    pub domain_name: String,
    /// Objects in declaration order, duplicates preserved so they can be reported.
    pub objects: Vec<Object>,
    pub init: AtomSet,
    pub goal: AtomSet,
}

/// Well-formedness issues that do not prevent parsing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum ProblemDefect {
    DuplicateObject(String),
    UndeclaredObject(String),
    SelfRelation(Atom),
}

impl ProblemModel {
    pub fn object_names(&self) -> Vec<&str> {
        self.objects.iter().map(|o| o.name.as_str()).collect()
    }

    pub fn defects(&self) -> Vec<ProblemDefect> {
        let mut defects = BTreeSet::new();
        let mut seen = BTreeSet::new();
        for object in &self.objects {
            if !seen.insert(object.name.as_str()) {
                defects.insert(ProblemDefect::DuplicateObject(object.name.clone()));
            }
        }
        for atom in self.init.iter().chain(&self.goal) {
            for arg in &atom.args {
                if !seen.contains(arg.as_str()) {
                    defects.insert(ProblemDefect::UndeclaredObject(arg.clone()));
                }
            }
            if atom.arity() == 2 && atom.args[0] == atom.args[1] {
                defects.insert(ProblemDefect::SelfRelation(atom.clone()));
            }
        }
        defects.into_iter().collect()
    }
}

pub(crate) fn opaque(expr: &SExpr) -> String {
    expr.to_string().to_lowercase()
}
