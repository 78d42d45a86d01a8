//! First-order formulas: syntax tree, text parser and truth evaluation.
//!
//! Evaluation uses the min/max/complement calculus; implication and
//! biconditional are rewritten as `¬A ∨ B` and `(A ⇒ B) ∧ (B ⇒ A)`, which
//! goes beyond the three connectives fuzzy logic usually defines but keeps
//! agreement with classical logic on binary inputs.

mod eval;
mod formula;
mod parser;

pub use eval::{binary_eval, eval_with, fuzzy_eval, EvalError, Valuation, World};
pub use formula::{Atom, Formula, Term};
pub use parser::{parse_formula, ParseError};
