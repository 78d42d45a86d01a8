use std::collections::{BTreeSet, HashMap};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Constant(String),
    /// Implicitly universally quantified.
    Variable(String),
    /// A `+var` slot, expanded into one formula per domain value.
    Template(String),
}

impl Term {
    pub fn constant(name: impl Into<String>) -> Self {
        Term::Constant(name.into())
    }

    pub fn variable(name: impl Into<String>) -> Self {
        Term::Variable(name.into())
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Term::Constant(_))
    }

    pub fn as_constant(&self) -> Option<&str> {
        match self {
            Term::Constant(c) => Some(c),
            _ => None,
        }
    }

    /// Name of a variable or template slot.
    pub fn var_name(&self) -> Option<&str> {
        match self {
            Term::Variable(v) | Term::Template(v) => Some(v),
            Term::Constant(_) => None,
        }
    }
}

fn is_bare_constant(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase() || c.is_ascii_digit())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(c) if is_bare_constant(c) => f.write_str(c),
            Term::Constant(c) => write!(f, "\"{c}\""),
            Term::Variable(v) => f.write_str(v),
            Term::Template(v) => write!(f, "+{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    /// Builds a ground atom from constant names.
    pub fn ground<S: AsRef<str>>(predicate: &str, args: &[S]) -> Self {
        Atom::new(
            predicate,
            args.iter().map(|a| Term::constant(a.as_ref())).collect(),
        )
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn substitute(&self, binding: &HashMap<String, String>) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|t| substitute_term(t, binding))
                .collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

fn substitute_term(t: &Term, binding: &HashMap<String, String>) -> Term {
    match t.var_name().and_then(|v| binding.get(v)) {
        Some(c) => Term::Constant(c.clone()),
        None => t.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(Atom),
    /// Builtin `t1 =/= t2`, true iff the two constants differ.
    NotEquals(Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(a: Atom) -> Self {
        Formula::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// Left-nested conjunction of `parts`; `None` when empty.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Option<Formula> {
        parts.into_iter().reduce(Formula::and)
    }

    fn children(&self) -> [Option<&Formula>; 2] {
        match self {
            Formula::Atom(_) | Formula::NotEquals(..) => [None, None],
            Formula::Not(a) => [Some(a), None],
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => [Some(a), Some(b)],
        }
    }

    /// Atoms in left-to-right order (builtins excluded).
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Atom(a) = f {
                out.push(a);
            }
        });
        out
    }

    fn visit<'a>(&'a self, visitor: &mut impl FnMut(&'a Formula)) {
        visitor(self);
        for c in self.children().into_iter().flatten() {
            c.visit(visitor);
        }
    }

    fn terms(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        self.visit(&mut |f| match f {
            Formula::Atom(a) => out.extend(a.args.iter()),
            Formula::NotEquals(x, y) => out.extend([x, y]),
            _ => {}
        });
        out
    }

    /// Distinct variable names in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.terms()
            .into_iter()
            .filter_map(|t| match t {
                Term::Variable(v) if seen.insert(v.clone()) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }

    /// Distinct `+` slot names in order of first appearance.
    pub fn template_slots(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.terms()
            .into_iter()
            .filter_map(|t| match t {
                Term::Template(v) if seen.insert(v.clone()) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn constants(&self) -> BTreeSet<String> {
        self.terms()
            .into_iter()
            .filter_map(|t| t.as_constant().map(str::to_string))
            .collect()
    }

    pub fn is_ground(&self) -> bool {
        self.terms().iter().all(|t| t.is_ground())
    }

    /// Replaces variables and template slots named in `binding` by constants.
    pub fn substitute(&self, binding: &HashMap<String, String>) -> Formula {
        match self {
            Formula::Atom(a) => Formula::Atom(a.substitute(binding)),
            Formula::NotEquals(x, y) => {
                Formula::NotEquals(substitute_term(x, binding), substitute_term(y, binding))
            }
            Formula::Not(a) => Formula::not(a.substitute(binding)),
            Formula::And(a, b) => Formula::and(a.substitute(binding), b.substitute(binding)),
            Formula::Or(a, b) => Formula::or(a.substitute(binding), b.substitute(binding)),
            Formula::Implies(a, b) => {
                Formula::implies(a.substitute(binding), b.substitute(binding))
            }
            Formula::Iff(a, b) => Formula::iff(a.substitute(binding), b.substitute(binding)),
        }
    }

    /// Top-level conjuncts, flattening nested `And`.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        fn walk<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::And(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                f => out.push(f),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Iff(..) => 1,
            Formula::Implies(..) => 2,
            Formula::Or(..) => 3,
            Formula::And(..) => 4,
            Formula::Not(_) => 5,
            Formula::Atom(_) | Formula::NotEquals(..) => 6,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, child: &Formula, paren: bool| {
            if paren {
                write!(f, "({child})")
            } else {
                write!(f, "{child}")
            }
        };
        let p = self.precedence();
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::NotEquals(x, y) => write!(f, "{x} =/= {y}"),
            Formula::Not(a) => {
                f.write_str("!")?;
                wrap(f, a, a.precedence() < p)
            }
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                let op = match self {
                    Formula::And(..) => "^",
                    Formula::Or(..) => "v",
                    Formula::Implies(..) => "=>",
                    _ => "<=>",
                };
                wrap(f, a, a.precedence() < p)?;
                write!(f, " {op} ")?;
                wrap(f, b, b.precedence() <= p)
            }
        }
    }
}
