use std::collections::HashMap;

use thiserror::Error;

use super::formula::{Atom, Formula, Term};
use crate::scalar::Truth;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("formula is not ground: variable '{0}'")]
    NonGround(String),
    #[error("no truth value for atom {0}")]
    Unbound(String),
    #[error("non-binary truth value {value} for atom {atom}")]
    NonBinary { atom: String, value: String },
    #[error("truth value {value} for atom {atom} lies outside [0, 1]")]
    OutOfRange { atom: String, value: String },
}

/// Supplies truth values of ground atoms.
pub trait Valuation<T> {
    fn value(&self, atom: &Atom) -> Option<T>;
}

/// Truth assignment to ground atoms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct World<T> {
    truth: HashMap<Atom, T>,
}

impl<T: Truth> World<T> {
    pub fn new() -> Self {
        World {
            truth: HashMap::new(),
        }
    }

    pub fn set(&mut self, atom: Atom, value: T) -> Result<(), EvalError> {
        if value < T::zero() || value > T::one() {
            return Err(EvalError::OutOfRange {
                atom: atom.to_string(),
                value: format!("{value:?}"),
            });
        }
        self.truth.insert(atom, value);
        Ok(())
    }

    pub fn set_bool(&mut self, atom: Atom, value: bool) {
        self.truth
            .insert(atom, if value { T::one() } else { T::zero() });
    }

    pub fn get(&self, atom: &Atom) -> Option<T> {
        self.truth.get(atom).copied()
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Atom, &T)> {
        self.truth.iter()
    }

    /// Checks that every atom whose predicate is not fuzzy is exactly 0 or 1.
    pub fn check_binary(&self, is_fuzzy: impl Fn(&str) -> bool) -> Result<(), EvalError> {
        for (atom, &v) in &self.truth {
            if !is_fuzzy(&atom.predicate) && v != T::zero() && v != T::one() {
                return Err(EvalError::NonBinary {
                    atom: atom.to_string(),
                    value: format!("{v:?}"),
                });
            }
        }
        Ok(())
    }
}

impl<T: Truth> Valuation<T> for World<T> {
    fn value(&self, atom: &Atom) -> Option<T> {
        self.get(atom)
    }
}

impl<T: Truth, F: Fn(&Atom) -> Option<T>> Valuation<T> for F {
    fn value(&self, atom: &Atom) -> Option<T> {
        self(atom)
    }
}

fn constant_of(t: &Term) -> Result<&str, EvalError> {
    match t {
        Term::Constant(c) => Ok(c),
        Term::Variable(v) | Term::Template(v) => Err(EvalError::NonGround(v.clone())),
    }
}

/// Evaluates `f` with min/max/complement semantics, resolving atoms through
/// `leaf`. `A ⇒ B` is `max(1 − A, B)`; `A ⇔ B` is the min of both implications.
pub fn eval_with<T: Truth, E>(
    f: &Formula,
    leaf: &mut impl FnMut(&Atom) -> Result<T, E>,
) -> Result<T, E>
where
    E: From<EvalError>,
{
    Ok(match f {
        Formula::Atom(a) => leaf(a)?,
        Formula::NotEquals(x, y) => {
            if constant_of(x)? != constant_of(y)? {
                T::one()
            } else {
                T::zero()
            }
        }
        Formula::Not(a) => eval_with(a, leaf)?.complement(),
        Formula::And(a, b) => eval_with(a, leaf)?.min_truth(eval_with(b, leaf)?),
        Formula::Or(a, b) => eval_with(a, leaf)?.max_truth(eval_with(b, leaf)?),
        Formula::Implies(a, b) => {
            let va = eval_with(a, leaf)?;
            va.complement().max_truth(eval_with(b, leaf)?)
        }
        Formula::Iff(a, b) => {
            let (va, vb) = (eval_with(a, leaf)?, eval_with(b, leaf)?);
            va.complement()
                .max_truth(vb)
                .min_truth(vb.complement().max_truth(va))
        }
    })
}

/// Fuzzy truth of a ground formula in `world`.
pub fn fuzzy_eval<T: Truth>(f: &Formula, world: &impl Valuation<T>) -> Result<T, EvalError> {
    eval_with(f, &mut |a: &Atom| {
        if let Some(t) = a.args.iter().find(|t| !t.is_ground()) {
            return Err(EvalError::NonGround(
                t.var_name().unwrap_or_default().to_string(),
            ));
        }
        world
            .value(a)
            .ok_or_else(|| EvalError::Unbound(a.to_string()))
    })
}

/// Classical satisfaction of a ground formula. Fails on any non-binary atom.
pub fn binary_eval<T: Truth>(f: &Formula, world: &impl Valuation<T>) -> Result<bool, EvalError> {
    fn go<T: Truth>(f: &Formula, world: &impl Valuation<T>) -> Result<bool, EvalError> {
        Ok(match f {
            Formula::Atom(a) => {
                if let Some(t) = a.args.iter().find(|t| !t.is_ground()) {
                    return Err(EvalError::NonGround(
                        t.var_name().unwrap_or_default().to_string(),
                    ));
                }
                let v = world
                    .value(a)
                    .ok_or_else(|| EvalError::Unbound(a.to_string()))?;
                if v == T::one() {
                    true
                } else if v == T::zero() {
                    false
                } else {
                    return Err(EvalError::NonBinary {
                        atom: a.to_string(),
                        value: format!("{v:?}"),
                    });
                }
            }
            Formula::NotEquals(x, y) => constant_of(x)? != constant_of(y)?,
            Formula::Not(a) => !go(a, world)?,
            Formula::And(a, b) => {
                let (va, vb) = (go(a, world)?, go(b, world)?);
                va && vb
            }
            Formula::Or(a, b) => {
                let (va, vb) = (go(a, world)?, go(b, world)?);
                va || vb
            }
            Formula::Implies(a, b) => {
                let (va, vb) = (go(a, world)?, go(b, world)?);
                !va || vb
            }
            Formula::Iff(a, b) => go(a, world)? == go(b, world)?,
        })
    }
    go(f, world)
}
