//! The trust-rule language: sorts, terms, literals and CP/NSP rules.
//!
//! Rules are written as `Head <- L1 & L2 & ... & Ln.` or `Head.` for facts.
//! Identifiers starting with an uppercase letter are variables; everything
//! else is a constant. Constants that do not fit the bare lexical form are
//! written in single quotes (`'D1X022RV'`).

mod parser;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parser::{parse_literal, parse_rule, parse_rules, ParseError, ParseErrorKind};
pub use validate::{validate_rule, ValidationError};

/// The sort every constant and variable belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sort {
    NetworkSlice,
    Component,
    Property,
    Target,
    Resource,
    Action,
    Permission,
    Number,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Sort::NetworkSlice => "NetworkSlice",
            Sort::Component => "Component",
            Sort::Property => "Property",
            Sort::Target => "Target",
            Sort::Resource => "Resource",
            Sort::Action => "Action",
            Sort::Permission => "Permission",
            Sort::Number => "Number",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TermKind {
    Constant,
    Variable,
}

/// A sorted constant or variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Term {
    pub kind: TermKind,
    pub name: String,
    pub sort: Sort,
}

impl Term {
    /// Builds a constant. Property constants of the form `hash_<hex>` have
    /// their hex part lowercased.
    pub fn constant(name: impl Into<String>, sort: Sort) -> Self {
        let mut name = name.into();
        if sort == Sort::Property {
            name = normalise_hash_constant(name);
        }
        Term { kind: TermKind::Constant, name, sort }
    }

    pub fn variable(name: impl Into<String>, sort: Sort) -> Self {
        Term { kind: TermKind::Variable, name: name.into(), sort }
    }

    pub fn is_variable(&self) -> bool {
        self.kind == TermKind::Variable
    }

    pub fn is_constant(&self) -> bool {
        self.kind == TermKind::Constant
    }
}

fn normalise_hash_constant(name: String) -> String {
    match name.strip_prefix("hash_") {
        Some(hex) if !hex.is_empty() && hex.bytes().all(|b| b.is_ascii_hexdigit()) => {
            format!("hash_{}", hex.to_ascii_lowercase())
        }
        _ => name,
    }
}

/// True when `name` can be written without quotes as a constant.
pub(crate) fn is_bare_constant(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn is_variable_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TermKind::Variable => f.write_str(&self.name),
            TermKind::Constant if is_bare_constant(&self.name) => f.write_str(&self.name),
            TermKind::Constant => {
                f.write_str("'")?;
                for c in self.name.chars() {
                    match c {
                        '\'' => f.write_str("\\'")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("'")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Predicate {
    HasC,
    HasNS,
    SatC,
    SatNS,
    PreReq,
    Do,
}

impl Predicate {
    pub const ALL: [Predicate; 6] = [
        Predicate::HasC,
        Predicate::HasNS,
        Predicate::SatC,
        Predicate::SatNS,
        Predicate::PreReq,
        Predicate::Do,
    ];

    /// Argument sorts, in order.
    pub fn signature(self) -> &'static [Sort] {
        use Sort::*;
        match self {
            Predicate::HasC => &[Component, Component],
            Predicate::HasNS => &[NetworkSlice, Component],
            Predicate::SatC => &[Component, Property],
            Predicate::SatNS => &[NetworkSlice, Property],
            Predicate::PreReq => &[Component, Property, Component, Property],
            Predicate::Do => &[NetworkSlice, Resource, Action, Permission],
        }
    }

    pub fn arity(self) -> usize {
        self.signature().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            Predicate::HasC => "HasC",
            Predicate::HasNS => "HasNS",
            Predicate::SatC => "SatC",
            Predicate::SatNS => "SatNS",
            Predicate::PreReq => "PreReq",
            Predicate::Do => "Do",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The two admissible permission constants.
pub const PERMISSIONS: [&str; 2] = ["allow", "deny"];

/// A predicate applied to sorted arguments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub predicate: Predicate,
    pub args: Vec<Term>,
}

/// Error raised when building a literal whose arguments do not fit the
/// predicate signature.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignatureError {
    #[error("{predicate} expects {expected} arguments, found {found}")]
    Arity { predicate: Predicate, expected: usize, found: usize },
    #[error("argument {position} of {predicate} must be {expected}, `{name}` is {found}")]
    Sort { predicate: Predicate, position: usize, name: String, expected: Sort, found: Sort },
    #[error("permission must be one of allow/deny, found `{0}`")]
    Permission(String),
}

impl Literal {
    /// Builds a literal, checking arity and argument sorts.
    pub fn new(predicate: Predicate, args: Vec<Term>) -> Result<Self, SignatureError> {
        let lit = Literal { predicate, args };
        lit.check_signature()?;
        Ok(lit)
    }

    /// Builds a ground literal from constant names; sorts come from the
    /// predicate signature.
    pub fn ground(predicate: Predicate, names: &[&str]) -> Result<Self, SignatureError> {
        let sig = predicate.signature();
        if names.len() != sig.len() {
            return Err(SignatureError::Arity {
                predicate,
                expected: sig.len(),
                found: names.len(),
            });
        }
        let args = names.iter().zip(sig).map(|(n, s)| Term::constant(*n, *s)).collect();
        Literal::new(predicate, args)
    }

    pub fn sat_c(component: &str, property: &str) -> Self {
        Literal::ground(Predicate::SatC, &[component, property]).expect("SatC signature")
    }

    pub fn sat_ns(slice: &str, property: &str) -> Self {
        Literal::ground(Predicate::SatNS, &[slice, property]).expect("SatNS signature")
    }

    pub fn has_c(parent: &str, child: &str) -> Self {
        Literal::ground(Predicate::HasC, &[parent, child]).expect("HasC signature")
    }

    pub fn has_ns(slice: &str, component: &str) -> Self {
        Literal::ground(Predicate::HasNS, &[slice, component]).expect("HasNS signature")
    }

    pub fn check_signature(&self) -> Result<(), SignatureError> {
        let sig = self.predicate.signature();
        if self.args.len() != sig.len() {
            return Err(SignatureError::Arity {
                predicate: self.predicate,
                expected: sig.len(),
                found: self.args.len(),
            });
        }
        for (position, (arg, expected)) in self.args.iter().zip(sig).enumerate() {
            if arg.sort != *expected {
                return Err(SignatureError::Sort {
                    predicate: self.predicate,
                    position,
                    name: arg.name.clone(),
                    expected: *expected,
                    found: arg.sort,
                });
            }
            if arg.sort == Sort::Permission
                && arg.is_constant()
                && !PERMISSIONS.contains(&arg.name.as_str())
            {
                return Err(SignatureError::Permission(arg.name.clone()));
            }
        }
        Ok(())
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_constant)
    }

    pub fn variables(&self) -> impl Iterator<Item = &Term> {
        self.args.iter().filter(|t| t.is_variable())
    }

    /// Applies a binding; unbound variables are left in place.
    pub fn apply(&self, binding: &Binding) -> Literal {
        Literal {
            predicate: self.predicate,
            args: self
                .args
                .iter()
                .map(|t| match t.kind {
                    TermKind::Variable => binding.get(&t.name).cloned().unwrap_or_else(|| t.clone()),
                    TermKind::Constant => t.clone(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        if self.predicate == Predicate::PreReq && self.args.len() == 4 {
            let a = &self.args;
            return write!(f, "({},{}),({},{}))", a[0], a[1], a[2], a[3]);
        }
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{arg}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleKind {
    /// Component-property rule, head `SatC`.
    Cp,
    /// Network-slice-property rule, head `SatNS`.
    Nsp,
    /// Ground literal with an empty body.
    Fact,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::Cp => "CP",
            RuleKind::Nsp => "NSP",
            RuleKind::Fact => "fact",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub head: Literal,
    pub body: Vec<Literal>,
    pub kind: RuleKind,
}

/// Variable name to constant.
pub type Binding = BTreeMap<String, Term>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubstituteError {
    #[error("binding for {variable} is {found} but the variable ranges over {expected}")]
    SortViolation { variable: String, expected: Sort, found: Sort },
    #[error("binding for {0} is not a constant")]
    NotConstant(String),
}

impl Rule {
    /// Builds a rule, inferring its kind from the head and body shape.
    pub fn new(head: Literal, body: Vec<Literal>) -> Self {
        let kind = Self::infer_kind(&head, &body);
        Rule { head, body, kind }
    }

    pub fn fact(head: Literal) -> Self {
        Rule { head, body: Vec::new(), kind: RuleKind::Fact }
    }

    pub(crate) fn infer_kind(head: &Literal, body: &[Literal]) -> RuleKind {
        if body.is_empty() {
            RuleKind::Fact
        } else if head.predicate == Predicate::SatNS {
            RuleKind::Nsp
        } else {
            RuleKind::Cp
        }
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        std::iter::once(&self.head).chain(self.body.iter())
    }

    pub fn variables(&self) -> BTreeSet<&Term> {
        self.literals().flat_map(Literal::variables).collect()
    }

    pub fn is_ground(&self) -> bool {
        self.literals().all(Literal::is_ground)
    }

    /// Every head variable also occurs in the body.
    pub fn is_range_restricted(&self) -> bool {
        let body_vars: BTreeSet<&str> =
            self.body.iter().flat_map(Literal::variables).map(|t| t.name.as_str()).collect();
        self.head.variables().all(|v| body_vars.contains(v.name.as_str()))
    }

    /// Replaces bound variables by their constants.
    pub fn substitute(&self, binding: &Binding) -> Result<Rule, SubstituteError> {
        for var in self.variables() {
            if let Some(value) = binding.get(&var.name) {
                if !value.is_constant() {
                    return Err(SubstituteError::NotConstant(var.name.clone()));
                }
                if value.sort != var.sort {
                    return Err(SubstituteError::SortViolation {
                        variable: var.name.clone(),
                        expected: var.sort,
                        found: value.sort,
                    });
                }
            }
        }
        Ok(Rule {
            head: self.head.apply(binding),
            body: self.body.iter().map(|l| l.apply(binding)).collect(),
            kind: self.kind,
        })
    }

    /// The rule with variables renamed `V0, V1, ...` in order of first
    /// occurrence; two rules equal up to renaming share this form.
    pub fn canonical(&self) -> Rule {
        let mut names: BTreeMap<String, String> = BTreeMap::new();
        let mut rename = |lit: &Literal| Literal {
            predicate: lit.predicate,
            args: lit
                .args
                .iter()
                .map(|t| {
                    if t.is_variable() {
                        let next = format!("V{}", names.len());
                        let name = names.entry(t.name.clone()).or_insert(next).clone();
                        Term::variable(name, t.sort)
                    } else {
                        t.clone()
                    }
                })
                .collect(),
        };
        let head = rename(&self.head);
        let body = self.body.iter().map(&mut rename).collect();
        Rule { head, body, kind: self.kind }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" <- ")?;
            for (i, lit) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(" & ")?;
                }
                write!(f, "{lit}")?;
            }
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleBaseError {
    #[error("invalid rule `{rule}`: {source}")]
    Invalid { rule: String, source: ValidationError },
    #[error("duplicate rule `{0}`")]
    Duplicate(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// A validated, duplicate-free list of rules for one administrative realm.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleBase {
    realm: String,
    rules: Vec<Rule>,
}

impl RuleBase {
    pub fn new(realm: impl Into<String>) -> Self {
        RuleBase { realm: realm.into(), rules: Vec::new() }
    }

    /// Parses and adds every rule in a `.lopat` document.
    pub fn from_text(realm: impl Into<String>, text: &str) -> Result<Self, RuleBaseError> {
        let mut base = RuleBase::new(realm);
        for rule in parse_rules(text)? {
            base.add(rule)?;
        }
        Ok(base)
    }

    pub fn realm(&self) -> &str {
        &self.realm
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn add(&mut self, rule: Rule) -> Result<(), RuleBaseError> {
        validate_rule(&rule)
            .map_err(|source| RuleBaseError::Invalid { rule: rule.to_string(), source })?;
        let canonical = rule.canonical();
        if self.rules.iter().any(|r| r.canonical() == canonical) {
            return Err(RuleBaseError::Duplicate(rule.to_string()));
        }
        self.rules.push(rule);
        Ok(())
    }

    pub fn extend(&mut self, other: &RuleBase) -> Result<(), RuleBaseError> {
        for rule in other.rules() {
            self.add(rule.clone())?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&rule.to_string());
            out.push('\n');
        }
        out
    }
}
