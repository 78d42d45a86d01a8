//! Evidence databases of ground atoms.
//!
//! One atom per line, `//` comments:
//!
//! ```text
//! instance_of(Fred, Turkey)     // true
//! !flies(Tweety)                // explicitly false
//! ?instance_of(W1, "cup.n.01")  // hidden: a query variable even under --cw
//! ```
//!
//! Atoms of fuzzy predicates are never asserted; their truth comes from the
//! taxonomy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use thiserror::Error;

use crate::logic::{parse_formula, Atom, Formula, World};
use crate::model::{Mln, ModelError};
use crate::scalar::{Real, Truth};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EvidenceError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: atom {atom} is not ground")]
    NonGround { line: usize, atom: String },
    #[error("line {line}: {source}")]
    Model { line: usize, source: ModelError },
    #[error("line {line}: fuzzy predicate atom {atom} cannot be asserted; its truth comes from the taxonomy")]
    FuzzyAsserted { line: usize, atom: String },
    #[error("line {line}: contradictory assertion of {atom}")]
    Contradiction { line: usize, atom: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    Positive,
    Negative,
    Hidden,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Database {
    pub positive: BTreeSet<Atom>,
    pub negative: BTreeSet<Atom>,
    /// Atoms that stay unobserved at inference time. In a training database
    /// a hidden atom is a free variable of the likelihood whose observed
    /// value is its closed-world truth.
    pub hidden: BTreeSet<Atom>,
    /// Constants observed per domain.
    pub constants: BTreeMap<String, BTreeSet<String>>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse_str<T: Real>(text: &str, m: &Mln<T>) -> Result<Self, EvidenceError> {
        Self::parse(text.as_bytes(), m)
    }

    pub fn parse<R: BufRead, T: Real>(reader: R, m: &Mln<T>) -> Result<Self, EvidenceError> {
        let mut db = Database::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| EvidenceError::Io(e.to_string()))?;
            let line = line.split("//").next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (mark, text) = if let Some(rest) = line.strip_prefix('!') {
                (Mark::Negative, rest)
            } else if let Some(rest) = line.strip_prefix('?') {
                (Mark::Hidden, rest)
            } else {
                (Mark::Positive, line)
            };
            let atom = match parse_formula(text) {
                Ok(Formula::Atom(a)) => a,
                Ok(_) => {
                    return Err(EvidenceError::Syntax {
                        line: lineno,
                        message: format!("expected a single ground atom, found '{text}'"),
                    })
                }
                Err(e) => {
                    return Err(EvidenceError::Syntax {
                        line: lineno,
                        message: e.to_string(),
                    })
                }
            };
            db.insert(atom, mark, m).map_err(|e| e.at_line(lineno))?;
        }
        Ok(db)
    }

    fn insert<T: Real>(&mut self, atom: Atom, mark: Mark, m: &Mln<T>) -> Result<(), EvidenceError> {
        if !atom.is_ground() {
            return Err(EvidenceError::NonGround {
                line: 0,
                atom: atom.to_string(),
            });
        }
        let decl = m
            .check_atom(&atom)
            .map_err(|e| EvidenceError::Model { line: 0, source: e })?;
        if decl.fuzzy {
            return Err(EvidenceError::FuzzyAsserted {
                line: 0,
                atom: atom.to_string(),
            });
        }
        let clash = match mark {
            Mark::Positive => self.negative.contains(&atom),
            Mark::Negative => self.positive.contains(&atom) || self.hidden.contains(&atom),
            Mark::Hidden => self.negative.contains(&atom),
        };
        if clash {
            return Err(EvidenceError::Contradiction {
                line: 0,
                atom: atom.to_string(),
            });
        }
        for (term, domain) in atom.args.iter().zip(&decl.domains) {
            if let Some(c) = term.as_constant() {
                self.constants
                    .entry(domain.clone())
                    .or_default()
                    .insert(c.to_string());
            }
        }
        match mark {
            Mark::Positive => self.positive.insert(atom),
            Mark::Negative => self.negative.insert(atom),
            Mark::Hidden => self.hidden.insert(atom),
        };
        Ok(())
    }

    pub fn assert_true<T: Real>(&mut self, atom: Atom, m: &Mln<T>) -> Result<(), EvidenceError> {
        self.insert(atom, Mark::Positive, m)
    }

    pub fn assert_false<T: Real>(&mut self, atom: Atom, m: &Mln<T>) -> Result<(), EvidenceError> {
        self.insert(atom, Mark::Negative, m)
    }

    pub fn mark_hidden<T: Real>(&mut self, atom: Atom, m: &Mln<T>) -> Result<(), EvidenceError> {
        self.insert(atom, Mark::Hidden, m)
    }

    /// Every mentioned atom with a flag telling whether it is asserted true.
    pub fn atoms(&self) -> impl Iterator<Item = (&Atom, bool)> {
        self.positive
            .iter()
            .map(|a| (a, true))
            .chain(self.negative.iter().map(|a| (a, false)))
            .chain(
                self.hidden
                    .iter()
                    .filter(|a| !self.positive.contains(*a))
                    .map(|a| (a, false)),
            )
    }

    /// Closed-world truth of a binary atom: true iff asserted.
    pub fn holds(&self, atom: &Atom) -> bool {
        self.positive.contains(atom)
    }

    /// Closed-world assignment for `atoms`: each binary atom is true iff
    /// asserted. Atoms of fuzzy predicates are left out.
    pub fn close_world<'a, T: Truth>(
        &self,
        atoms: impl IntoIterator<Item = &'a Atom>,
        is_fuzzy: impl Fn(&str) -> bool,
    ) -> World<T> {
        let mut w = World::new();
        for a in atoms {
            if !is_fuzzy(&a.predicate) {
                w.set_bool(a.clone(), self.holds(a));
            }
        }
        w
    }
}

impl EvidenceError {
    fn at_line(self, line: usize) -> Self {
        match self {
            EvidenceError::NonGround { atom, .. } => EvidenceError::NonGround { line, atom },
            EvidenceError::Model { source, .. } => EvidenceError::Model { line, source },
            EvidenceError::FuzzyAsserted { atom, .. } => {
                EvidenceError::FuzzyAsserted { line, atom }
            }
            EvidenceError::Contradiction { atom, .. } => {
                EvidenceError::Contradiction { line, atom }
            }
            other => other,
        }
    }
}

impl fmt::Display for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.positive {
            writeln!(f, "{a}")?;
        }
        for a in &self.negative {
            writeln!(f, "!{a}")?;
        }
        for a in &self.hidden {
            writeln!(f, "?{a}")?;
        }
        Ok(())
    }
}
