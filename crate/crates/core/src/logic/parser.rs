//! Recursive-descent parser for the ASCII formula syntax:
//! `!` not, `^` and, `v` or, `=>` implies, `<=>` iff, `=/=` not-equals,
//! `pred(arg, ...)` atoms and `+var` template slots.
//!
//! Identifiers starting with a lowercase letter or `_` are variables; those
//! starting with an uppercase letter or digit, and double-quoted strings,
//! are constants.

use thiserror::Error;

use super::formula::{Atom, Formula, Term};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Plus,
    LParen,
    RParen,
    Comma,
    Not,
    And,
    Implies,
    Iff,
    NotEquals,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut push = |tok, width: usize, i: &mut usize, col: &mut usize| {
            out.push(Token {
                tok,
                line: tl,
                column: tc,
            });
            *i += width;
            *col += width;
        };
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '!' => push(Tok::Not, 1, &mut i, &mut col),
            '^' => push(Tok::And, 1, &mut i, &mut col),
            '+' => push(Tok::Plus, 1, &mut i, &mut col),
            '=' if rest.starts_with("=/=") => push(Tok::NotEquals, 3, &mut i, &mut col),
            '=' if rest.starts_with("=>") => push(Tok::Implies, 2, &mut i, &mut col),
            '<' if rest.starts_with("<=>") => push(Tok::Iff, 3, &mut i, &mut col),
            '"' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                    j += 1;
                }
                if j >= chars.len() || chars[j] != '"' {
                    return Err(err(tl, tc, "unterminated quoted constant".into()));
                }
                let s: String = chars[start..j].iter().collect();
                if s.is_empty() {
                    return Err(err(tl, tc, "empty quoted constant".into()));
                }
                let width = j + 1 - i;
                push(Tok::Quoted(s), width, &mut i, &mut col);
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                let width = j - i;
                push(Tok::Ident(s), width, &mut i, &mut col);
            }
            _ => {
                let mut j = i;
                while j < chars.len()
                    && !chars[j].is_whitespace()
                    && !chars[j].is_ascii_alphanumeric()
                    && !matches!(chars[j], '(' | ')' | ',' | '"')
                {
                    j += 1;
                }
                let sym: String = chars[i..j.max(i + 1)].iter().collect();
                return Err(err(tl, tc, format!("unknown connective '{sym}'")));
            }
        }
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let idx = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let t = &self.tokens[self.pos];
        Err(ParseError {
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }

    fn is_or(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == "v")
    }

    fn iff(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.implies()?;
        while *self.peek() == Tok::Iff {
            self.bump();
            lhs = Formula::iff(lhs, self.implies()?);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.or()?;
        while *self.peek() == Tok::Implies {
            self.bump();
            lhs = Formula::implies(lhs, self.or()?);
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while self.is_or() {
            self.bump();
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::LParen => {
                self.bump();
                let f = self.iff()?;
                if *self.peek() != Tok::RParen {
                    return self.error("expected ')'");
                }
                self.bump();
                Ok(f)
            }
            _ => self.primary(),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Plus => {
                self.bump();
                match self.peek().clone() {
                    Tok::Ident(name) if starts_variable(&name) => {
                        self.bump();
                        Ok(Term::Template(name))
                    }
                    _ => self.error("'+' must be followed by a variable name"),
                }
            }
            Tok::Quoted(s) => {
                self.bump();
                Ok(Term::Constant(s))
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(if starts_variable(&name) {
                    Term::Variable(name)
                } else {
                    Term::Constant(name)
                })
            }
            _ => self.error("expected a term"),
        }
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        if let Tok::Ident(name) = self.peek().clone() {
            if *self.peek_at(1) == Tok::LParen {
                self.bump();
                self.bump();
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        args.push(self.term()?);
                        match self.peek() {
                            Tok::Comma => {
                                self.bump();
                            }
                            Tok::RParen => break,
                            _ => return self.error("expected ',' or ')' in argument list"),
                        }
                    }
                }
                self.bump();
                return Ok(Formula::Atom(Atom::new(name, args)));
            }
            if *self.peek_at(1) != Tok::NotEquals && starts_variable(&name) {
                self.bump();
                return Ok(Formula::Atom(Atom::new(name, vec![])));
            }
        }
        match self.peek() {
            Tok::Ident(_) | Tok::Quoted(_) | Tok::Plus => {
                let lhs = self.term()?;
                if *self.peek() != Tok::NotEquals {
                    return self.error("expected '=/=' after term");
                }
                self.bump();
                let rhs = self.term()?;
                Ok(Formula::NotEquals(lhs, rhs))
            }
            Tok::End => self.error("unexpected end of formula"),
            other => {
                let msg = format!("unexpected token {other:?}");
                self.error(msg)
            }
        }
    }
}

fn starts_variable(name: &str) -> bool {
    name.starts_with(|c: char| c.is_ascii_lowercase() || c == '_')
}

/// Parses one formula. Precedence, tightest first: `!`, `^`, `v`, `=>`,
/// `<=>`; binary connectives associate to the left.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser {
        tokens: lex(text)?,
        pos: 0,
    };
    let f = p.iff()?;
    if *p.peek() != Tok::End {
        return p.error("trailing input after formula");
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(p: &str, args: &[Term]) -> Formula {
        Formula::Atom(Atom::new(p, args.to_vec()))
    }

    #[test]
    fn two_conjuncts() {
        let f = parse_formula("flies(e) ^ instance_of(e, Parrot_n_01)").unwrap();
        assert_eq!(
            f,
            Formula::and(
                atom("flies", &[Term::variable("e")]),
                atom(
                    "instance_of",
                    &[Term::variable("e"), Term::constant("Parrot_n_01")]
                ),
            )
        );
    }

    #[test]
    fn precedence() {
        let f = parse_formula("a(x) v b(x) => c(x)").unwrap();
        let x = || vec![Term::variable("x")];
        assert_eq!(
            f,
            Formula::implies(
                Formula::or(atom("a", &x()), atom("b", &x())),
                atom("c", &x())
            )
        );
        let g = parse_formula("!a(x) ^ b(x) <=> c(x) v d(x)").unwrap();
        assert!(matches!(g, Formula::Iff(..)));
        if let Formula::Iff(l, r) = g {
            assert!(matches!(*l, Formula::And(..)));
            assert!(matches!(*r, Formula::Or(..)));
        }
    }

    #[test]
    fn left_associative() {
        let f = parse_formula("a(X) => b(X) => c(X)").unwrap();
        match f {
            Formula::Implies(l, _) => assert!(matches!(*l, Formula::Implies(..))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn template_and_not_equals() {
        let f = parse_formula("sem_role(w1,+r1) ^ w1 =/= w2").unwrap();
        let parts = f.conjuncts();
        assert_eq!(parts.len(), 2);
        assert_eq!(
            *parts[1],
            Formula::NotEquals(Term::variable("w1"), Term::variable("w2"))
        );
        assert_eq!(f.template_slots(), vec!["r1".to_string()]);
        assert_eq!(f.variables(), vec!["w1".to_string(), "w2".to_string()]);
    }

    #[test]
    fn quoted_and_capitalized_constants() {
        let f = parse_formula("is_a(s, \"cup.n.01\") ^ is_a(s, Cup_n_01)").unwrap();
        let c = f.constants();
        assert!(c.contains("cup.n.01") && c.contains("Cup_n_01"));
    }

    #[test]
    fn v_can_still_name_a_predicate() {
        let f = parse_formula("v(x) v w(x)").unwrap();
        assert!(matches!(f, Formula::Or(..)));
    }

    #[test]
    fn errors_carry_position() {
        let e = parse_formula("a(x) & b(x)").unwrap_err();
        assert_eq!((e.line, e.column), (1, 6));
        assert!(e.message.contains("unknown connective '&'"));
        let e = parse_formula("a(x) ^\n  (b(x)").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_formula("a(x) ^").is_err());
        assert!(parse_formula("a(x,)").is_err());
        assert!(parse_formula("a(x) b(x)").is_err());
        assert!(parse_formula("a(x) -> b(x)")
            .unwrap_err()
            .message
            .contains("unknown connective"));
        assert!(parse_formula("p(+X)").is_err());
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "flies(e) ^ instance_of(e, Parrot_n_01)",
            "a(x) v b(x) => c(x)",
            "!(a(x) ^ b(x)) <=> !a(x) v !b(x)",
            "(a(X) => b(X)) => c(X)",
            "a(X) => (b(X) => c(X))",
            "is_a(s, \"cup.n.01\") ^ s =/= \"milk.n.01\"",
            "has_pos(w1, +p1) ^ w1 =/= w2",
            "a(x) ^ (b(x) ^ c(x))",
        ] {
            let f = parse_formula(text).unwrap();
            let again = parse_formula(&f.to_string()).unwrap();
            assert_eq!(f, again, "{text} -> {f}");
        }
    }
}
