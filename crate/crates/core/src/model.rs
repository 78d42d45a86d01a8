//! MLN container: predicate declarations, weighted formulas, domains and
//! `+` template expansion.
//!
//! File format, one item per line, `//` comments:
//!
//! ```text
//! flies(entity)                 // declaration
//! is_a(sense, concept)
//! #fuzzy is_a                   // truth comes from the taxonomy
//! sense = {Turkey, Parrot_n_01}  // optional explicit domain members
//! 2.1972 flies(e) ^ instance_of(e, s) ^ is_a(s, Parrot_n_01)
//! flies(e) => has_wings(e).     // hard formula
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;

use thiserror::Error;

use crate::evidence::Database;
use crate::logic::{parse_formula, Atom, Formula, ParseError, Term};
use crate::scalar::Real;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: formula: {source}")]
    Formula { line: usize, source: ParseError },
    #[error("line {line}: undeclared predicate '{name}'")]
    UndeclaredPredicate { line: usize, name: String },
    #[error("line {line}: predicate '{name}' takes {expected} argument(s), found {found}")]
    ArityMismatch {
        line: usize,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: duplicate declaration of '{name}'")]
    DuplicateDeclaration { line: usize, name: String },
    #[error("line {line}: fuzzy predicate '{name}' must be binary (arity 2)")]
    FuzzyArity { line: usize, name: String },
    #[error("variable '{var}' used with conflicting domains {first} and {second}")]
    VariableDomainConflict {
        var: String,
        first: String,
        second: String,
    },
    #[error("constant '{constant}' used in conflicting domains {first} and {second}")]
    ConstantDomainConflict {
        constant: String,
        first: String,
        second: String,
    },
    #[error("template slot '+{slot}' ranges over empty domain '{domain}'")]
    EmptyTemplateDomain { slot: String, domain: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub domains: Vec<String>,
    pub fuzzy: bool,
}

impl PredicateDecl {
    pub fn arity(&self) -> usize {
        self.domains.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight<T> {
    Soft(T),
    /// Infinite weight: worlds violating the formula are impossible.
    Hard,
}

impl<T: Real> Weight<T> {
    pub fn soft(self) -> Option<T> {
        match self {
            Weight::Soft(w) => Some(w),
            Weight::Hard => None,
        }
    }

    pub fn is_hard(self) -> bool {
        matches!(self, Weight::Hard)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFormula<T> {
    pub weight: Weight<T>,
    pub formula: Formula,
    /// `(variable, domain)` for every `+` slot, in order of appearance.
    pub template_slots: Vec<(String, String)>,
}

impl<T: Real> WeightedFormula<T> {
    pub fn is_template(&self) -> bool {
        !self.template_slots.is_empty()
    }
}

impl<T: Real> fmt::Display for WeightedFormula<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.weight {
            Weight::Soft(w) => write!(f, "{w} {}", self.formula),
            Weight::Hard => write!(f, "{}.", self.formula),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mln<T> {
    predicates: BTreeMap<String, PredicateDecl>,
    /// Declaration order, for printing.
    order: Vec<String>,
    pub formulas: Vec<WeightedFormula<T>>,
    /// Members listed with `domain = {...}` lines.
    declared_domains: BTreeMap<String, BTreeSet<String>>,
    /// Domain name to constants, filled by [`Mln::collect_domains`].
    domains: BTreeMap<String, BTreeSet<String>>,
}

impl<T: Real> Default for Mln<T> {
    fn default() -> Self {
        Mln {
            predicates: BTreeMap::new(),
            order: Vec::new(),
            formulas: Vec::new(),
            declared_domains: BTreeMap::new(),
            domains: BTreeMap::new(),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    // `//` inside a quoted constant is not a comment.
    let mut in_quote = false;
    let bytes = line.as_bytes();
    for i in 0..bytes.len() {
        match bytes[i] {
            b'"' => in_quote = !in_quote,
            b'/' if !in_quote && bytes.get(i + 1) == Some(&b'/') => return &line[..i],
            _ => {}
        }
    }
    line
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn looks_like_weight(token: &str) -> bool {
    token.starts_with(|c: char| c.is_ascii_digit() || matches!(c, '-' | '.'))
        || (token.starts_with('+')
            && token[1..].starts_with(|c: char| c.is_ascii_digit() || c == '.'))
}

impl<T: Real> Mln<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse_str(text: &str) -> Result<Self, ModelError> {
        Self::parse(text.as_bytes())
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self, ModelError> {
        let mut m = Mln::new();
        let mut fuzzy_marks: Vec<(usize, String)> = Vec::new();
        let mut pending: Vec<(usize, Weight<T>, Formula)> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| ModelError::Io(e.to_string()))?;
            let line = strip_comment(&line).trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| ModelError::Syntax {
                line: lineno,
                message,
            };
            if let Some(rest) = line.strip_prefix("#fuzzy") {
                let name = rest.trim();
                if !is_identifier(name) {
                    return Err(syntax(format!(
                        "expected '#fuzzy <predicate>', found '{line}'"
                    )));
                }
                fuzzy_marks.push((lineno, name.to_string()));
                continue;
            }
            if line.starts_with('#') {
                return Err(syntax(format!("unknown directive '{line}'")));
            }
            if let Some((lhs, rhs)) = line.split_once('=') {
                let (lhs, rhs) = (lhs.trim(), rhs.trim());
                if is_identifier(lhs) && rhs.starts_with('{') {
                    let body = rhs
                        .strip_prefix('{')
                        .and_then(|r| r.strip_suffix('}'))
                        .ok_or_else(|| {
                            syntax("domain members must be enclosed in '{...}'".into())
                        })?;
                    let members = m.declared_domains.entry(lhs.to_string()).or_default();
                    for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        members.insert(item.trim_matches('"').to_string());
                    }
                    continue;
                }
            }
            let first = line.split_whitespace().next().unwrap_or_default();
            if looks_like_weight(first) {
                let w: T = first
                    .parse()
                    .map_err(|_| syntax(format!("invalid weight '{first}'")))?;
                if !w.is_finite() {
                    return Err(syntax(format!("weight must be finite, found '{first}'")));
                }
                let text = line[first.len()..].trim();
                let f = parse_formula(text).map_err(|e| ModelError::Formula {
                    line: lineno,
                    source: e,
                })?;
                pending.push((lineno, Weight::Soft(w), f));
            } else if let Some(text) = line.strip_suffix('.') {
                let f = parse_formula(text).map_err(|e| ModelError::Formula {
                    line: lineno,
                    source: e,
                })?;
                pending.push((lineno, Weight::Hard, f));
            } else {
                let decl = parse_declaration(line).map_err(syntax)?;
                if m.predicates.contains_key(&decl.name) {
                    return Err(ModelError::DuplicateDeclaration {
                        line: lineno,
                        name: decl.name,
                    });
                }
                m.order.push(decl.name.clone());
                m.predicates.insert(decl.name.clone(), decl);
            }
        }
        for (lineno, name) in fuzzy_marks {
            let decl =
                m.predicates
                    .get_mut(&name)
                    .ok_or_else(|| ModelError::UndeclaredPredicate {
                        line: lineno,
                        name: name.clone(),
                    })?;
            if decl.arity() != 2 {
                return Err(ModelError::FuzzyArity { line: lineno, name });
            }
            decl.fuzzy = true;
        }
        for (lineno, weight, formula) in pending {
            m.push_formula(weight, formula).map_err(|e| match e {
                ModelError::UndeclaredPredicate { name, .. } => {
                    ModelError::UndeclaredPredicate { line: lineno, name }
                }
                ModelError::ArityMismatch {
                    name,
                    expected,
                    found,
                    ..
                } => ModelError::ArityMismatch {
                    line: lineno,
                    name,
                    expected,
                    found,
                },
                other => other,
            })?;
        }
        m.domains = m.declared_domains.clone();
        m.add_formula_constants()?;
        Ok(m)
    }

    pub fn declare(&mut self, name: &str, domains: &[&str], fuzzy: bool) -> Result<(), ModelError> {
        if self.predicates.contains_key(name) {
            return Err(ModelError::DuplicateDeclaration {
                line: 0,
                name: name.into(),
            });
        }
        if fuzzy && domains.len() != 2 {
            return Err(ModelError::FuzzyArity {
                line: 0,
                name: name.into(),
            });
        }
        self.order.push(name.to_string());
        self.predicates.insert(
            name.to_string(),
            PredicateDecl {
                name: name.to_string(),
                domains: domains.iter().map(|d| d.to_string()).collect(),
                fuzzy,
            },
        );
        Ok(())
    }

    /// Adds a formula after checking its atoms against the declarations.
    pub fn push_formula(&mut self, weight: Weight<T>, formula: Formula) -> Result<(), ModelError> {
        for atom in formula.atoms() {
            self.check_atom(atom)?;
        }
        let var_domains = self.variable_domains(&formula)?;
        let template_slots = formula
            .template_slots()
            .into_iter()
            .map(|v| {
                let d = var_domains[&v].clone();
                (v, d)
            })
            .collect();
        self.formulas.push(WeightedFormula {
            weight,
            formula,
            template_slots,
        });
        Ok(())
    }

    pub fn add_formula(&mut self, weight: Weight<T>, text: &str) -> Result<(), ModelError> {
        let f = parse_formula(text).map_err(|e| ModelError::Formula { line: 0, source: e })?;
        self.push_formula(weight, f)?;
        self.add_formula_constants()
    }

    pub fn check_atom(&self, atom: &Atom) -> Result<&PredicateDecl, ModelError> {
        let decl = self.predicates.get(&atom.predicate).ok_or_else(|| {
            ModelError::UndeclaredPredicate {
                line: 0,
                name: atom.predicate.clone(),
            }
        })?;
        if decl.arity() != atom.args.len() {
            return Err(ModelError::ArityMismatch {
                line: 0,
                name: atom.predicate.clone(),
                expected: decl.arity(),
                found: atom.args.len(),
            });
        }
        Ok(decl)
    }

    /// Domain of every variable and template slot, from the argument positions
    /// it occupies. Variables only compared with `=/=` take the domain of
    /// their partner.
    pub fn variable_domains(
        &self,
        formula: &Formula,
    ) -> Result<BTreeMap<String, String>, ModelError> {
        let mut out: BTreeMap<String, String> = BTreeMap::new();
        for atom in formula.atoms() {
            let decl = self.check_atom(atom)?;
            for (term, domain) in atom.args.iter().zip(&decl.domains) {
                if let Some(v) = term.var_name() {
                    match out.get(v) {
                        Some(prev) if prev != domain => {
                            return Err(ModelError::VariableDomainConflict {
                                var: v.to_string(),
                                first: prev.clone(),
                                second: domain.clone(),
                            })
                        }
                        Some(_) => {}
                        None => {
                            out.insert(v.to_string(), domain.clone());
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.get(name)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &PredicateDecl> {
        self.order.iter().map(|n| &self.predicates[n])
    }

    pub fn is_fuzzy(&self, predicate: &str) -> bool {
        self.predicates.get(predicate).is_some_and(|d| d.fuzzy)
    }

    /// Argument domains of fuzzy predicates. Their constants are taxonomy
    /// concepts.
    pub fn taxonomy_domains(&self) -> BTreeSet<&str> {
        self.predicates
            .values()
            .filter(|d| d.fuzzy)
            .flat_map(|d| d.domains.iter().map(String::as_str))
            .collect()
    }

    pub fn domains(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.domains
    }

    pub fn domain(&self, name: &str) -> Option<&BTreeSet<String>> {
        self.domains.get(name)
    }

    pub fn declared_domains(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.declared_domains
    }

    pub fn weights(&self) -> Vec<Weight<T>> {
        self.formulas.iter().map(|f| f.weight).collect()
    }

    /// Replaces every soft weight by the matching entry of `weights`.
    pub fn with_weights(&self, weights: &[T]) -> Self {
        let mut m = self.clone();
        for (f, &w) in m.formulas.iter_mut().zip(weights) {
            if let Weight::Soft(_) = f.weight {
                f.weight = Weight::Soft(w);
            }
        }
        m
    }

    /// Constants appearing at each domain position of the formulas.
    fn formula_constants(&self) -> Result<Vec<(String, String)>, ModelError> {
        let mut out = Vec::new();
        for wf in &self.formulas {
            for atom in wf.formula.atoms() {
                let decl = self.check_atom(atom)?;
                for (term, domain) in atom.args.iter().zip(&decl.domains) {
                    if let Some(c) = term.as_constant() {
                        out.push((domain.clone(), c.to_string()));
                    }
                }
            }
        }
        Ok(out)
    }

    fn add_formula_constants(&mut self) -> Result<(), ModelError> {
        let consts = self.formula_constants()?;
        let mut seen: HashMap<String, String> = HashMap::new();
        for (d, members) in &self.domains {
            for c in members {
                seen.entry(c.clone()).or_insert_with(|| d.clone());
            }
        }
        let taxo: BTreeSet<String> = self
            .taxonomy_domains()
            .into_iter()
            .map(String::from)
            .collect();
        for (domain, c) in consts {
            check_domain_conflict(&mut seen, &taxo, &c, &domain)?;
            self.domains.entry(domain).or_default().insert(c);
        }
        Ok(())
    }

    /// Recomputes domains as the union of declared members, formula
    /// constants and every constant the databases place at each argument
    /// position.
    ///
    /// Constants of asserted (positive) atoms at a taxonomy-domain position
    /// are added to all taxonomy domains, so the senses seen in training
    /// become the concepts that `+` slots over the concept domain range over.
    pub fn collect_domains(&self, dbs: &[Database]) -> Result<Self, ModelError> {
        let mut m = self.clone();
        m.domains = m.declared_domains.clone();
        m.add_formula_constants()?;
        let taxo: BTreeSet<String> = m.taxonomy_domains().into_iter().map(String::from).collect();
        let mut seen: HashMap<String, String> = HashMap::new();
        for (d, members) in &m.domains {
            for c in members {
                seen.entry(c.clone()).or_insert_with(|| d.clone());
            }
        }
        for db in dbs {
            for (atom, positive) in db.atoms() {
                let decl = m.check_atom(atom)?.clone();
                for (term, domain) in atom.args.iter().zip(&decl.domains) {
                    let Some(c) = term.as_constant() else {
                        continue;
                    };
                    check_domain_conflict(&mut seen, &taxo, c, domain)?;
                    m.domains
                        .entry(domain.clone())
                        .or_default()
                        .insert(c.to_string());
                    if positive && taxo.contains(domain) {
                        for t in &taxo {
                            m.domains
                                .entry(t.clone())
                                .or_default()
                                .insert(c.to_string());
                        }
                    }
                }
            }
        }
        Ok(m)
    }

    /// Replaces every template formula by one formula per combination of
    /// slot values, each carrying its own copy of the template weight.
    pub fn expand_templates(&self) -> Result<Self, ModelError> {
        let mut m = self.clone();
        m.formulas.clear();
        for wf in &self.formulas {
            if !wf.is_template() {
                m.formulas.push(wf.clone());
                continue;
            }
            let mut value_lists = Vec::with_capacity(wf.template_slots.len());
            for (slot, domain) in &wf.template_slots {
                let values: Vec<&String> = self
                    .domains
                    .get(domain)
                    .map(|s| s.iter().collect())
                    .unwrap_or_default();
                if values.is_empty() {
                    return Err(ModelError::EmptyTemplateDomain {
                        slot: slot.clone(),
                        domain: domain.clone(),
                    });
                }
                value_lists.push(values);
            }
            let mut counters = vec![0usize; value_lists.len()];
            'combos: loop {
                let binding: HashMap<String, String> = wf
                    .template_slots
                    .iter()
                    .zip(&counters)
                    .zip(&value_lists)
                    .map(|(((slot, _), &i), vals)| (slot.clone(), vals[i].clone()))
                    .collect();
                m.formulas.push(WeightedFormula {
                    weight: wf.weight,
                    formula: wf.formula.substitute(&binding),
                    template_slots: vec![],
                });
                // Odometer increment, last slot fastest.
                for k in (0..counters.len()).rev() {
                    counters[k] += 1;
                    if counters[k] < value_lists[k].len() {
                        continue 'combos;
                    }
                    counters[k] = 0;
                }
                break;
            }
        }
        Ok(m)
    }

    pub fn is_expanded(&self) -> bool {
        self.formulas.iter().all(|f| !f.is_template())
    }
}

fn check_domain_conflict(
    seen: &mut HashMap<String, String>,
    taxonomy_domains: &BTreeSet<String>,
    constant: &str,
    domain: &str,
) -> Result<(), ModelError> {
    match seen.get(constant) {
        Some(prev)
            if prev != domain
                && !(taxonomy_domains.contains(prev) && taxonomy_domains.contains(domain)) =>
        {
            Err(ModelError::ConstantDomainConflict {
                constant: constant.to_string(),
                first: prev.clone(),
                second: domain.to_string(),
            })
        }
        Some(_) => Ok(()),
        None => {
            seen.insert(constant.to_string(), domain.to_string());
            Ok(())
        }
    }
}

fn parse_declaration(line: &str) -> Result<PredicateDecl, String> {
    let f = parse_formula(line)
        .map_err(|e| format!("expected declaration or weighted formula: {e}"))?;
    let Formula::Atom(atom) = f else {
        return Err(format!(
            "'{line}' is neither a declaration nor a weighted formula (missing weight or trailing '.')"
        ));
    };
    let domains = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Variable(d) => Ok(d.clone()),
            other => Err(format!(
                "declaration argument '{other}' must be a lowercase domain name"
            )),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PredicateDecl {
        name: atom.predicate,
        domains,
        fuzzy: false,
    })
}

impl<T: Real> fmt::Display for Mln<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for decl in self.predicates() {
            writeln!(f, "{}({})", decl.name, decl.domains.join(", "))?;
        }
        for decl in self.predicates().filter(|d| d.fuzzy) {
            writeln!(f, "#fuzzy {}", decl.name)?;
        }
        for (name, members) in &self.declared_domains {
            let items: Vec<String> = members
                .iter()
                .map(|c| Term::Constant(c.clone()).to_string())
                .collect();
            writeln!(f, "{name} = {{{}}}", items.join(", "))?;
        }
        for wf in &self.formulas {
            writeln!(f, "{wf}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARROT: &str = "\
flies(entity)
instance_of(entity, sense)
is_a(sense, concept)
#fuzzy is_a
2.1972245773362196 flies(e) ^ instance_of(e, s) ^ is_a(s, Parrot_n_01)
-2.1972245773362196 flies(e) ^ instance_of(e, s) ^ is_a(s, Mammal_n_01)
";

    const WSD: &str = "\
has_pos(word, pos)
instance_of(word, sense)
is_a(sense, concept)
#fuzzy is_a
0 has_pos(w1, +p1) ^ has_pos(w2, +p2) ^ instance_of(w1, s1) ^ is_a(s1, +c1) ^ instance_of(w2, s2) ^ is_a(s2, +c2) ^ w1 =/= w2
";

    #[test]
    fn minimal_model() {
        let m: Mln<f64> = Mln::parse_str("flies(entity)\n1.0 flies(e)").unwrap();
        assert_eq!(m.predicates().count(), 1);
        assert_eq!(m.formulas.len(), 1);
        assert_eq!(m.formulas[0].weight, Weight::Soft(1.0));
    }

    #[test]
    fn parrot_model() {
        let m: Mln<f64> = Mln::parse_str(PARROT).unwrap();
        assert_eq!(m.formulas.len(), 2);
        let w1 = m.formulas[0].weight.soft().unwrap();
        let w2 = m.formulas[1].weight.soft().unwrap();
        assert!((w1 - (0.9f64 / 0.1).ln()).abs() < 1e-12);
        assert!((w2 - (0.1f64 / 0.9).ln()).abs() < 1e-12);
        assert!(m.is_fuzzy("is_a") && !m.is_fuzzy("flies"));
        assert!(m.domain("concept").unwrap().contains("Parrot_n_01"));
    }

    #[test]
    fn wsd_template_parses() {
        let m: Mln<f64> = Mln::parse_str(WSD).unwrap();
        assert_eq!(m.formulas.len(), 1);
        let slots: Vec<(&str, &str)> = m.formulas[0]
            .template_slots
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        assert_eq!(
            slots,
            [
                ("p1", "pos"),
                ("p2", "pos"),
                ("c1", "concept"),
                ("c2", "concept")
            ]
        );
    }

    #[test]
    fn hard_formula_and_comments() {
        let m: Mln<f64> =
            Mln::parse_str("p(t) // decl\nq(t)\np(x) => q(x).\n// only a comment\n").unwrap();
        assert!(m.formulas[0].weight.is_hard());
    }

    #[test]
    fn parse_errors() {
        let err = |s: &str| Mln::<f64>::parse_str(s).unwrap_err();
        assert!(matches!(
            err("1.0 flies(e)"),
            ModelError::UndeclaredPredicate { line: 1, .. }
        ));
        assert!(matches!(
            err("p(t)\n\n2 p(x, y)"),
            ModelError::ArityMismatch {
                line: 3,
                expected: 1,
                found: 2,
                ..
            }
        ));
        assert!(matches!(
            err("p(t)\np(u)"),
            ModelError::DuplicateDeclaration { line: 2, .. }
        ));
        assert!(matches!(
            err("p(t)\n1.0 p(x) &"),
            ModelError::Formula { line: 2, .. }
        ));
        assert!(matches!(
            err("p(t)\n#fuzzy p"),
            ModelError::FuzzyArity { .. }
        ));
        assert!(matches!(
            err("p(t)\np(x) ^ p(y)"),
            ModelError::Syntax { line: 2, .. }
        ));
        assert!(matches!(
            err("p(t)\nq(u)\n1 p(x) ^ q(x)"),
            ModelError::VariableDomainConflict { .. }
        ));
        assert!(matches!(err("p(t)\ninf p(x)"), ModelError::Syntax { .. }));
    }

    fn template_model(slots: &str) -> Mln<f64> {
        Mln::parse_str(&format!(
            "p(thing)\nr(thing, role)\nc = {{A, B}}\nrole = {{P, Q}}\nuses(thing, c)\n{slots}"
        ))
        .unwrap()
    }

    #[test]
    fn expansion_single_slot() {
        let m = template_model("1.5 uses(x, +k)");
        let e = m.expand_templates().unwrap();
        let texts: Vec<String> = e.formulas.iter().map(|f| f.to_string()).collect();
        assert_eq!(texts, ["1.5 uses(x, A)", "1.5 uses(x, B)"]);
    }

    #[test]
    fn expansion_cross_product() {
        let m = template_model("1 uses(x, +k) ^ r(x, +q)");
        let e = m.expand_templates().unwrap();
        assert_eq!(e.formulas.len(), 4);
        assert!(e.is_expanded());
        // Idempotent.
        assert_eq!(e.expand_templates().unwrap(), e);
    }

    #[test]
    fn expansion_needs_domain() {
        let m: Mln<f64> = Mln::parse_str("p(t)\nq(t, k)\n1 q(x, +z)").unwrap();
        assert_eq!(
            m.expand_templates().unwrap_err(),
            ModelError::EmptyTemplateDomain {
                slot: "z".into(),
                domain: "k".into()
            }
        );
    }

    #[test]
    fn round_trip_print_parse() {
        for text in [
            PARROT,
            WSD,
            "p(t)\nq(t)\nt = {A, \"b.c\"}\np(x) => q(x).\n-0.25 !p(A) v q(x)\n",
        ] {
            let m: Mln<f64> = Mln::parse_str(text).unwrap();
            let again: Mln<f64> = Mln::parse_str(&m.to_string()).unwrap();
            assert_eq!(m, again);
        }
    }

    #[test]
    fn with_weights_leaves_hard_formulas() {
        let m: Mln<f64> = Mln::parse_str("p(t)\n1 p(x)\np(A).").unwrap();
        let m2 = m.with_weights(&[3.0, 9.0]);
        assert_eq!(m2.weights(), vec![Weight::Soft(3.0), Weight::Hard]);
    }
}
