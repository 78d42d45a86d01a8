//! Ground Markov random field construction.
//!
//! Every binary ground atom is either free (a variable of the distribution)
//! or pinned to evidence. Every atom of a fuzzy predicate is pinned to the
//! similarity of its two concepts, identically in all worlds.
//!
//! Ground formulas are compiled into factors: a ground formula's value
//! depends only on its free atoms, so formulas sharing the same free-atom
//! set are merged into one table per source formula. Groundings whose value
//! is fixed by the evidence do not depend on the world; constant ones are
//! folded into per-formula offsets and provably-zero conjunctions are only
//! counted.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::evidence::Database;
use crate::logic::{Atom, Formula, Term, World};
use crate::model::{Mln, ModelError, Weight};
use crate::scalar::Real;
use crate::taxonomy::{normalize_concept_name, Taxonomy};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GroundingError {
    #[error("concept '{0}' is missing from the taxonomy")]
    ConceptMissing(String),
    #[error("variable '{var}' in formula '{formula}' has no domain (it must appear in an atom)")]
    UnboundDomain { var: String, formula: String },
    #[error("model has unexpanded template formulas; expand them before grounding")]
    NotExpanded,
    #[error("hard formula '{0}' cannot be satisfied given the evidence")]
    HardUnsatisfiable(String),
    #[error("similarity {value} for is_a({sense}, {concept}) lies outside [0, 1]")]
    SimilarityRange {
        sense: String,
        concept: String,
        value: String,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("closed predicates differ from those the model was compiled with")]
    ClosedMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Truth semantics for `is_a` atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Classical MLN: `is_a(s, c)` is 1 when `s` and `c` name the same concept, else 0.
    Fol,
    /// `is_a(s, c)` carries the taxonomy similarity of `s` and `c`.
    #[default]
    Fuzzy,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Fol => "fol",
            Mode::Fuzzy => "fuzzy",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fol" => Ok(Mode::Fol),
            "fuzzy" => Ok(Mode::Fuzzy),
            _ => Err(format!("unknown mode '{s}' (expected fol or fuzzy)")),
        }
    }
}

/// How unmentioned and asserted atoms are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Purpose {
    /// Asserted atoms are evidence; everything else of an open predicate is free.
    #[default]
    Inference,
    /// Every atom of an open predicate is free, with the database giving its
    /// observed (closed-world) value. Closed predicates stay evidence.
    Training,
}

#[derive(Debug, Clone, Default)]
pub struct GroundingOptions {
    pub mode: Mode,
    /// Predicates under the closed-world assumption: their atoms are evidence
    /// (false unless asserted) except those the database marks hidden.
    pub closed: BTreeSet<String>,
    pub purpose: Purpose,
    /// Skip recording individual ground formulas (factors are kept either way).
    pub discard_formulas: bool,
}

impl GroundingOptions {
    pub fn new(mode: Mode) -> Self {
        GroundingOptions {
            mode,
            ..Default::default()
        }
    }

    pub fn closed<I, S>(mut self, predicates: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.closed.extend(predicates.into_iter().map(Into::into));
        self
    }

    pub fn training(mut self) -> Self {
        self.purpose = Purpose::Training;
        self
    }
}

/// Supplies `is_a` truth values in fuzzy mode.
pub trait SimilaritySource<T>: Sync {
    fn similarity(&self, sense: &str, concept: &str) -> Result<T, GroundingError>;
}

impl<T: Real> SimilaritySource<T> for Taxonomy {
    fn similarity(&self, sense: &str, concept: &str) -> Result<T, GroundingError> {
        let s = self
            .resolve(sense)
            .ok_or_else(|| GroundingError::ConceptMissing(sense.to_string()))?;
        let c = self
            .resolve(concept)
            .ok_or_else(|| GroundingError::ConceptMissing(concept.to_string()))?;
        Ok(self.wup(s, c))
    }
}

/// Explicitly pinned similarities, optionally backed by a taxonomy for pairs
/// not in the table. File format: `<sense> <concept> <value>` per line.
#[derive(Debug, Clone, Default)]
pub struct SimilarityTable<'a, T> {
    values: HashMap<(String, String), T>,
    fallback: Option<&'a Taxonomy>,
}

impl<'a, T: Real> SimilarityTable<'a, T> {
    pub fn new() -> Self {
        SimilarityTable {
            values: HashMap::new(),
            fallback: None,
        }
    }

    pub fn with_fallback(mut self, taxonomy: &'a Taxonomy) -> Self {
        self.fallback = Some(taxonomy);
        self
    }

    pub fn insert(&mut self, sense: &str, concept: &str, value: T) -> Result<(), GroundingError> {
        if !(value >= T::zero() && value <= T::one()) {
            return Err(GroundingError::SimilarityRange {
                sense: sense.into(),
                concept: concept.into(),
                value: value.to_string(),
            });
        }
        self.values.insert(
            (
                normalize_concept_name(sense),
                normalize_concept_name(concept),
            ),
            value,
        );
        Ok(())
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self, GroundingError> {
        let mut table = Self::new();
        for (idx, line) in reader.lines().enumerate() {
            let syntax = |message: String| GroundingError::Syntax {
                line: idx + 1,
                message,
            };
            let line = line.map_err(|e| syntax(e.to_string()))?;
            let content = line.split('#').next().unwrap_or_default();
            let fields: Vec<&str> = content.split_whitespace().collect();
            match fields.as_slice() {
                [] => {}
                [s, c, v] => {
                    let value: T = v
                        .parse()
                        .map_err(|_| syntax(format!("invalid similarity '{v}'")))?;
                    table
                        .insert(s, c, value)
                        .map_err(|e| syntax(e.to_string()))?;
                }
                _ => return Err(syntax("expected '<sense> <concept> <value>'".into())),
            }
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<T: Real> SimilaritySource<T> for SimilarityTable<'_, T> {
    fn similarity(&self, sense: &str, concept: &str) -> Result<T, GroundingError> {
        let key = (
            normalize_concept_name(sense),
            normalize_concept_name(concept),
        );
        if let Some(&v) = self.values.get(&key) {
            return Ok(v);
        }
        match self.fallback {
            Some(t) => SimilaritySource::<T>::similarity(t, sense, concept),
            None => Err(GroundingError::ConceptMissing(format!(
                "{sense} (no pinned similarity to {concept})"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AtomState<T> {
    /// Variable of the distribution, with its index among the free atoms.
    Free(usize),
    /// Binary evidence, 0 or 1.
    Evidence(T),
    /// Fuzzy atom pinned to a similarity.
    Similarity(T),
}

impl<T: Copy> AtomState<T> {
    pub fn pinned(self) -> Option<T> {
        match self {
            AtomState::Free(_) => None,
            AtomState::Evidence(v) | AtomState::Similarity(v) => Some(v),
        }
    }
}

/// A nonzero feature value: formula `formula` contributes `value` to the
/// score when the factor's variables take assignment `index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureEntry<T> {
    pub formula: usize,
    pub index: usize,
    pub value: T,
}

/// Factor over a set of free atoms. Bit `i` of an assignment index is the
/// value of `vars[i]`.
#[derive(Debug, Clone)]
pub struct Factor<T> {
    pub vars: Vec<usize>,
    /// Summed fuzzy values of the ground formulas over exactly these free
    /// atoms, per source formula and assignment; sorted, without duplicates.
    pub entries: Vec<FeatureEntry<T>>,
    /// Assignments allowed by the hard formulas over this variable set.
    pub allowed: Option<Vec<bool>>,
}

impl<T: Real> Factor<T> {
    pub fn index_of(&self, x: &[bool]) -> usize {
        self.vars
            .iter()
            .enumerate()
            .fold(0, |acc, (bit, &v)| acc | ((x[v] as usize) << bit))
    }

    pub fn size(&self) -> usize {
        1 << self.vars.len()
    }

    /// Value table of one source formula.
    pub fn table(&self, formula: usize) -> Vec<T> {
        let mut t = vec![T::zero(); self.size()];
        for e in self.entries.iter().filter(|e| e.formula == formula) {
            t[e.index] = e.value;
        }
        t
    }
}

#[derive(Debug, Clone)]
pub struct GroundFormula {
    pub parent: usize,
    /// Constant id bound to each variable of the parent formula, in
    /// [`Formula::variables`] order; see [`GroundMrf::constant_name`].
    pub binding: Vec<u32>,
    /// Atom index of every atom occurrence, in [`Formula::atoms`] order.
    pub atoms: Vec<usize>,
}

/// A ground Markov random field for one database.
#[derive(Debug, Clone)]
pub struct GroundMrf<T> {
    mode: Mode,
    formulas: Arc<[Formula]>,
    weights: Vec<Weight<T>>,
    constants: Vec<String>,
    atoms: Vec<Atom>,
    atom_index: HashMap<Atom, usize>,
    states: Vec<AtomState<T>>,
    free: Vec<usize>,
    observed: Vec<bool>,
    ground: Vec<GroundFormula>,
    groundings: Vec<u64>,
    constant: Vec<T>,
    factors: Vec<Factor<T>>,
    var_factors: Vec<Vec<usize>>,
    components: Vec<Vec<usize>>,
}
// ---------------------------------------------------------------------------
// compilation of formulas into patterns over interned constants

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TermRef {
    Const(u32),
    Var(usize),
}

#[derive(Debug, Clone)]
struct AtomPattern {
    predicate: usize,
    args: Vec<TermRef>,
}

#[derive(Debug, Clone)]
enum Node {
    Atom(usize),
    NotEquals(TermRef, TermRef),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Implies(Box<Node>, Box<Node>),
    Iff(Box<Node>, Box<Node>),
}

fn resolve_ref(t: TermRef, binding: &[u32]) -> u32 {
    match t {
        TermRef::Const(c) => c,
        TermRef::Var(v) => binding[v],
    }
}

/// Evaluates with `leaf` returning `None` for atoms whose value is unknown.
/// Returns `None` only if the unknown atoms can change the result.
fn partial_eval<T: Real>(
    node: &Node,
    binding: &[u32],
    leaf: &mut impl FnMut(usize) -> Option<T>,
) -> Option<T> {
    let (zero, one) = (T::zero(), T::one());
    match node {
        Node::Atom(p) => leaf(*p),
        Node::NotEquals(a, b) => Some(if resolve_ref(*a, binding) != resolve_ref(*b, binding) {
            one
        } else {
            zero
        }),
        Node::Not(a) => partial_eval(a, binding, leaf).map(|v| one - v),
        Node::And(a, b) => {
            let (va, vb) = (
                partial_eval(a, binding, leaf),
                partial_eval(b, binding, leaf),
            );
            match (va, vb) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (Some(x), None) | (None, Some(x)) if x == zero => Some(zero),
                _ => None,
            }
        }
        Node::Or(a, b) => {
            let (va, vb) = (
                partial_eval(a, binding, leaf),
                partial_eval(b, binding, leaf),
            );
            match (va, vb) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (Some(x), None) | (None, Some(x)) if x == one => Some(one),
                _ => None,
            }
        }
        Node::Implies(a, b) => {
            let na = Node::Not(a.clone());
            partial_eval(&Node::Or(Box::new(na), b.clone()), binding, leaf)
        }
        Node::Iff(a, b) => {
            let (va, vb) = (
                partial_eval(a, binding, leaf),
                partial_eval(b, binding, leaf),
            );
            match (va, vb) {
                (Some(x), Some(y)) => Some((one - x).max(y).min((one - y).max(x))),
                _ => None,
            }
        }
    }
}

fn full_eval<T: Real>(node: &Node, binding: &[u32], leaf: &impl Fn(usize) -> T) -> T {
    let one = T::one();
    match node {
        Node::Atom(p) => leaf(*p),
        Node::NotEquals(a, b) => {
            if resolve_ref(*a, binding) != resolve_ref(*b, binding) {
                one
            } else {
                T::zero()
            }
        }
        Node::Not(a) => one - full_eval(a, binding, leaf),
        Node::And(a, b) => full_eval(a, binding, leaf).min(full_eval(b, binding, leaf)),
        Node::Or(a, b) => full_eval(a, binding, leaf).max(full_eval(b, binding, leaf)),
        Node::Implies(a, b) => (one - full_eval(a, binding, leaf)).max(full_eval(b, binding, leaf)),
        Node::Iff(a, b) => {
            let (x, y) = (full_eval(a, binding, leaf), full_eval(b, binding, leaf));
            (one - x).max(y).min((one - y).max(x))
        }
    }
}

struct Compiler<'a> {
    vars: &'a HashMap<String, usize>,
    interner: &'a mut Interner,
    predicates: &'a HashMap<String, usize>,
    patterns: Vec<AtomPattern>,
}

impl Compiler<'_> {
    fn term(&mut self, t: &Term) -> TermRef {
        match t {
            Term::Constant(c) => TermRef::Const(self.interner.intern(c)),
            Term::Variable(v) | Term::Template(v) => TermRef::Var(self.vars[v]),
        }
    }

    fn compile(&mut self, f: &Formula) -> Node {
        match f {
            Formula::Atom(a) => {
                let args = a.args.iter().map(|t| self.term(t)).collect();
                self.patterns.push(AtomPattern {
                    predicate: self.predicates[&a.predicate],
                    args,
                });
                Node::Atom(self.patterns.len() - 1)
            }
            Formula::NotEquals(x, y) => Node::NotEquals(self.term(x), self.term(y)),
            Formula::Not(a) => Node::Not(Box::new(self.compile(a))),
            Formula::And(a, b) => Node::And(Box::new(self.compile(a)), Box::new(self.compile(b))),
            Formula::Or(a, b) => Node::Or(Box::new(self.compile(a)), Box::new(self.compile(b))),
            Formula::Implies(a, b) => {
                Node::Implies(Box::new(self.compile(a)), Box::new(self.compile(b)))
            }
            Formula::Iff(a, b) => Node::Iff(Box::new(self.compile(a)), Box::new(self.compile(b))),
        }
    }
}

fn node_vars(node: &Node, patterns: &[AtomPattern], out: &mut BTreeSet<usize>) {
    let mut add = |t: &TermRef| {
        if let TermRef::Var(v) = t {
            out.insert(*v);
        }
    };
    match node {
        Node::Atom(p) => patterns[*p].args.iter().for_each(&mut add),
        Node::NotEquals(a, b) => {
            add(a);
            add(b);
        }
        Node::Not(a) => node_vars(a, patterns, out),
        Node::And(a, b) | Node::Or(a, b) | Node::Implies(a, b) | Node::Iff(a, b) => {
            node_vars(a, patterns, out);
            node_vars(b, patterns, out);
        }
    }
}

fn node_atoms(node: &Node, out: &mut Vec<usize>) {
    match node {
        Node::Atom(p) => out.push(*p),
        Node::NotEquals(..) => {}
        Node::Not(a) => node_atoms(a, out),
        Node::And(a, b) | Node::Or(a, b) | Node::Implies(a, b) | Node::Iff(a, b) => {
            node_atoms(a, out);
            node_atoms(b, out);
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Interner {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(s.to_string());
        self.index.insert(s.to_string(), i);
        i
    }
}

// ---------------------------------------------------------------------------
// grounding

const UNBOUND: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
enum Literal {
    Atom { pattern: usize, positive: bool },
    NotEquals(TermRef, TermRef),
}

fn as_literal(node: &Node) -> Option<Literal> {
    match node {
        Node::Atom(p) => Some(Literal::Atom {
            pattern: *p,
            positive: true,
        }),
        Node::Not(inner) => match inner.as_ref() {
            Node::Atom(p) => Some(Literal::Atom {
                pattern: *p,
                positive: false,
            }),
            _ => None,
        },
        Node::NotEquals(a, b) => Some(Literal::NotEquals(*a, *b)),
        _ => None,
    }
}

/// How one formula is enumerated.
struct Plan<T> {
    fi: usize,
    weight: Weight<T>,
    conjuncts: Vec<Node>,
    patterns: Vec<AtomPattern>,
    /// Set when every conjunct is a literal; such formulas skip table evaluation.
    literals: Option<Vec<Literal>>,
    order: Vec<usize>,
    /// Index into `Compiled::domain_names` per variable.
    var_domain: Vec<usize>,
    /// `checks[k]`: conjuncts fully bound once `order[k]` is bound; the
    /// extra last entry holds conjuncts without variables.
    checks: Vec<Vec<usize>>,
    /// Per level, a positive literal of a closed predicate whose non-false
    /// atoms enumerate the level's values: `(pattern, argument position)`.
    generators: Vec<Option<(usize, usize)>>,
}

#[derive(Clone, Copy)]
enum Candidates {
    Domain(usize),
    Support(usize),
}

/// Pinned minimum and free literals collected along the current binding.
struct Path<T> {
    min: T,
    free: Vec<(usize, bool)>,
}

/// An expanded model prepared for grounding against many databases under
/// the same options.
pub struct Compiled<'m, T> {
    m: &'m Mln<T>,
    opts: GroundingOptions,
    formulas: OnceLock<Arc<[Formula]>>,
    interner: Interner,
    pred_names: Vec<String>,
    pred_index: HashMap<String, usize>,
    pred_fuzzy: Vec<bool>,
    pred_closed: Vec<bool>,
    /// Declared members plus formula constants, by domain.
    base_domains: BTreeMap<String, BTreeSet<String>>,
    domain_names: Vec<String>,
    plans: Vec<Plan<T>>,
}

impl<'m, T: Real> Compiled<'m, T> {
    pub fn new(m: &'m Mln<T>, opts: &GroundingOptions) -> Result<Self, GroundingError> {
        if !m.is_expanded() {
            return Err(GroundingError::NotExpanded);
        }
        let mut c = Compiled {
            m,
            opts: opts.clone(),
            formulas: OnceLock::new(),
            interner: Interner::default(),
            pred_names: Vec::new(),
            pred_index: HashMap::new(),
            pred_fuzzy: Vec::new(),
            pred_closed: Vec::new(),
            base_domains: m.declared_domains().clone(),
            domain_names: Vec::new(),
            plans: Vec::new(),
        };
        for decl in m.predicates() {
            c.pred_index.insert(decl.name.clone(), c.pred_names.len());
            c.pred_names.push(decl.name.clone());
            c.pred_fuzzy.push(decl.fuzzy);
            c.pred_closed.push(opts.closed.contains(&decl.name));
        }
        for wf in &m.formulas {
            for atom in wf.formula.atoms() {
                let decl = m.check_atom(atom)?;
                for (t, d) in atom.args.iter().zip(&decl.domains) {
                    if let Some(k) = t.as_constant() {
                        let set = c.base_domains.entry(d.clone()).or_default();
                        if !set.contains(k) {
                            set.insert(k.to_string());
                        }
                    }
                }
            }
        }
        for (fi, wf) in m.formulas.iter().enumerate() {
            let plan = c.plan(fi, &wf.formula, wf.weight)?;
            c.plans.push(plan);
        }
        Ok(c)
    }

    pub fn model(&self) -> &'m Mln<T> {
        self.m
    }

    pub fn options(&self) -> &GroundingOptions {
        &self.opts
    }

    /// Grounds the prepared model against one database.
    pub fn ground(
        &self,
        db: &Database,
        sims: &dyn SimilaritySource<T>,
    ) -> Result<GroundMrf<T>, GroundingError> {
        Grounder::new(self, db, sims, &self.opts).run()
    }

    /// Grounds under different options. Mode, purpose and recording may
    /// change; the closed predicates must match the compiled ones.
    pub fn ground_with(
        &self,
        db: &Database,
        sims: &dyn SimilaritySource<T>,
        opts: &GroundingOptions,
    ) -> Result<GroundMrf<T>, GroundingError> {
        if opts.closed != self.opts.closed {
            return Err(GroundingError::ClosedMismatch);
        }
        Grounder::new(self, db, sims, opts).run()
    }

    fn domain_slot(&mut self, d: &str) -> usize {
        match self.domain_names.iter().position(|n| n == d) {
            Some(i) => i,
            None => {
                self.domain_names.push(d.to_string());
                self.domain_names.len() - 1
            }
        }
    }

    fn plan(
        &mut self,
        fi: usize,
        formula: &Formula,
        weight: Weight<T>,
    ) -> Result<Plan<T>, GroundingError> {
        let var_names = formula.variables();
        let var_domains = self.m.variable_domains(formula)?;
        let mut var_domain = Vec::with_capacity(var_names.len());
        for v in &var_names {
            let d = var_domains
                .get(v)
                .ok_or_else(|| GroundingError::UnboundDomain {
                    var: v.clone(),
                    formula: formula.to_string(),
                })?;
            var_domain.push(self.domain_slot(d));
        }
        let var_pos: HashMap<String, usize> = var_names
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let mut compiler = Compiler {
            vars: &var_pos,
            interner: &mut self.interner,
            predicates: &self.pred_index,
            patterns: Vec::new(),
        };
        let conjuncts: Vec<Node> = formula
            .conjuncts()
            .into_iter()
            .map(|c| compiler.compile(c))
            .collect();
        let patterns = compiler.patterns;
        let literals: Option<Vec<Literal>> = conjuncts.iter().map(as_literal).collect();

        // Bind variables greedily: next come the unbound variables of the
        // conjunct with the fewest of them, so pinned conjuncts prune early.
        let conj_vars: Vec<BTreeSet<usize>> = conjuncts
            .iter()
            .map(|c| {
                let mut s = BTreeSet::new();
                node_vars(c, &patterns, &mut s);
                s
            })
            .collect();
        let mut order: Vec<usize> = Vec::with_capacity(var_names.len());
        while order.len() < var_names.len() {
            let next = conj_vars
                .iter()
                .map(|s| {
                    s.iter()
                        .filter(|v| !order.contains(v))
                        .copied()
                        .collect::<Vec<_>>()
                })
                .filter(|u| !u.is_empty())
                .min_by_key(|u| u.len())
                .expect("every variable occurs in some conjunct");
            order.extend(next);
        }
        let level_of = |v: usize| order.iter().position(|&o| o == v).unwrap();
        let mut checks: Vec<Vec<usize>> = vec![Vec::new(); order.len() + 1];
        for (ci, vars) in conj_vars.iter().enumerate() {
            match vars.iter().map(|&v| level_of(v)).max() {
                Some(l) => checks[l].push(ci),
                None => checks[order.len()].push(ci),
            }
        }
        let generators = (0..order.len())
            .map(|level| {
                if weight.is_hard() {
                    return None;
                }
                let var = order[level];
                checks[level].iter().find_map(|&ci| {
                    let Node::Atom(p) = conjuncts[ci] else {
                        return None;
                    };
                    let pat = &patterns[p];
                    if !self.pred_closed[pat.predicate] || self.pred_fuzzy[pat.predicate] {
                        return None;
                    }
                    let positions: Vec<usize> = (0..pat.args.len())
                        .filter(|&j| pat.args[j] == TermRef::Var(var))
                        .collect();
                    if positions.len() != 1 {
                        return None;
                    }
                    Some((p, positions[0]))
                })
            })
            .collect();
        Ok(Plan {
            fi,
            weight,
            conjuncts,
            patterns,
            literals,
            order,
            var_domain,
            checks,
            generators,
        })
    }
}

struct Grounder<'c, 'm, T: Real> {
    c: &'c Compiled<'m, T>,
    opts: &'c GroundingOptions,
    db: &'c Database,
    sims: &'c dyn SimilaritySource<T>,
    interner: Interner,
    /// Constants of each domain in `Compiled::domain_names` order.
    lists: Vec<Vec<u32>>,
    /// `[predicate, args...]` to atom index.
    atom_keys: FxHashMap<Vec<u32>, usize>,
    atoms: Vec<Atom>,
    states: Vec<AtomState<T>>,
    free: Vec<usize>,
    sim_cache: FxHashMap<(u32, u32), T>,
    /// `[predicate, position, other args...]` to the constants at `position`
    /// of non-false atoms of closed predicates.
    support: FxHashMap<Vec<u32>, usize>,
    support_lists: Vec<Vec<u32>>,
    factor_keys: FxHashMap<Vec<usize>, usize>,
    factors: Vec<Factor<T>>,
    ground: Vec<GroundFormula>,
    groundings: Vec<u64>,
    constant: Vec<T>,
    key: Vec<u32>,
    args: Vec<u32>,
    lits: Vec<(usize, bool)>,
    vars: Vec<usize>,
}

impl<'c, 'm, T: Real> Grounder<'c, 'm, T> {
    fn new(
        c: &'c Compiled<'m, T>,
        db: &'c Database,
        sims: &'c dyn SimilaritySource<T>,
        opts: &'c GroundingOptions,
    ) -> Self {
        let n = c.plans.len();
        Grounder {
            c,
            opts,
            db,
            sims,
            interner: c.interner.clone(),
            lists: Vec::new(),
            atom_keys: FxHashMap::default(),
            atoms: Vec::new(),
            states: Vec::new(),
            free: Vec::new(),
            sim_cache: FxHashMap::default(),
            support: FxHashMap::default(),
            support_lists: Vec::new(),
            factor_keys: FxHashMap::default(),
            factors: Vec::new(),
            ground: Vec::new(),
            groundings: vec![0; n],
            constant: vec![T::zero(); n],
            key: Vec::new(),
            args: Vec::new(),
            lits: Vec::new(),
            vars: Vec::new(),
        }
    }

    fn atom_of(&self, pred: usize, args: &[u32]) -> Atom {
        Atom::new(
            self.c.pred_names[pred].clone(),
            args.iter()
                .map(|&k| Term::Constant(self.interner.names[k as usize].clone()))
                .collect(),
        )
    }

    fn similarity(&mut self, s: u32, k: u32) -> Result<T, GroundingError> {
        if let Some(&v) = self.sim_cache.get(&(s, k)) {
            return Ok(v);
        }
        let (sn, cn) = (
            &self.interner.names[s as usize],
            &self.interner.names[k as usize],
        );
        let v = match self.opts.mode {
            Mode::Fol => {
                if normalize_concept_name(sn) == normalize_concept_name(cn) {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Mode::Fuzzy => {
                let v = self.sims.similarity(sn, cn)?;
                if !(v >= T::zero() && v <= T::one()) {
                    return Err(GroundingError::SimilarityRange {
                        sense: sn.clone(),
                        concept: cn.clone(),
                        value: v.to_string(),
                    });
                }
                v
            }
        };
        self.sim_cache.insert((s, k), v);
        Ok(v)
    }

    fn lookup(&mut self, pred: usize, args: &[u32]) -> Option<usize> {
        self.key.clear();
        self.key.push(pred as u32);
        self.key.extend_from_slice(args);
        self.atom_keys.get(self.key.as_slice()).copied()
    }

    /// State an atom has, or would have if created.
    fn state_of(&mut self, pred: usize, args: &[u32]) -> Result<AtomState<T>, GroundingError> {
        if self.c.pred_fuzzy[pred] {
            return Ok(AtomState::Similarity(self.similarity(args[0], args[1])?));
        }
        if let Some(i) = self.lookup(pred, args) {
            return Ok(self.states[i]);
        }
        // Mentioned atoms and all atoms of open predicates were created up
        // front; anything else is closed-world false.
        Ok(AtomState::Evidence(T::zero()))
    }

    fn create(&mut self, pred: usize, args: &[u32]) -> Result<usize, GroundingError> {
        if let Some(i) = self.lookup(pred, args) {
            return Ok(i);
        }
        let atom = self.atom_of(pred, args);
        let state = if self.c.pred_fuzzy[pred] {
            AtomState::Similarity(self.similarity(args[0], args[1])?)
        } else {
            let hidden = self.db.hidden.contains(&atom);
            let positive = self.db.positive.contains(&atom);
            let mentioned = positive || self.db.negative.contains(&atom);
            let free = hidden
                || (!self.c.pred_closed[pred]
                    && (self.opts.purpose == Purpose::Training || !mentioned));
            if free {
                self.free.push(self.atoms.len());
                AtomState::Free(self.free.len() - 1)
            } else {
                AtomState::Evidence(if positive { T::one() } else { T::zero() })
            }
        };
        let idx = self.atoms.len();
        self.atoms.push(atom);
        self.states.push(state);
        let mut key = Vec::with_capacity(args.len() + 1);
        key.push(pred as u32);
        key.extend_from_slice(args);
        self.atom_keys.insert(key, idx);
        Ok(idx)
    }

    fn bind(&mut self, pat: &AtomPattern, binding: &[u32]) -> Vec<u32> {
        let mut args = std::mem::take(&mut self.args);
        args.clear();
        args.extend(pat.args.iter().map(|&t| resolve_ref(t, binding)));
        args
    }

    fn pattern_state(
        &mut self,
        pat: &AtomPattern,
        binding: &[u32],
    ) -> Result<AtomState<T>, GroundingError> {
        let args = self.bind(pat, binding);
        let r = self.state_of(pat.predicate, &args);
        self.args = args;
        r
    }

    fn build_support(&mut self) {
        let mut keys: Vec<(&Vec<u32>, usize)> =
            self.atom_keys.iter().map(|(k, &i)| (k, i)).collect();
        keys.sort_unstable();
        for (atom_key, idx) in keys {
            let pred = atom_key[0] as usize;
            if !self.c.pred_closed[pred] || self.c.pred_fuzzy[pred] {
                continue;
            }
            if self.states[idx] == AtomState::Evidence(T::zero()) {
                continue;
            }
            let args = &atom_key[1..];
            for pos in 0..args.len() {
                let mut key = vec![pred as u32, pos as u32];
                key.extend(
                    args.iter()
                        .enumerate()
                        .filter(|(j, _)| *j != pos)
                        .map(|(_, &k)| k),
                );
                let next = self.support_lists.len();
                let l = *self.support.entry(key).or_insert(next);
                if l == next {
                    self.support_lists.push(Vec::new());
                }
                self.support_lists[l].push(args[pos]);
            }
        }
        for list in &mut self.support_lists {
            list.sort_unstable();
            list.dedup();
        }
    }

    fn support_for(&mut self, pat: &AtomPattern, pos: usize, binding: &[u32]) -> Option<usize> {
        self.key.clear();
        self.key.push(pat.predicate as u32);
        self.key.push(pos as u32);
        for (j, &t) in pat.args.iter().enumerate() {
            if j != pos {
                self.key.push(resolve_ref(t, binding));
            }
        }
        self.support.get(self.key.as_slice()).copied()
    }

    fn run(mut self) -> Result<GroundMrf<T>, GroundingError> {
        let c = self.c;
        let m = c.m;

        // Domains of this database: declared members, formula constants and
        // the database's own constants.
        let mut domains = c.base_domains.clone();
        for (d, cs) in &self.db.constants {
            domains
                .entry(d.clone())
                .or_default()
                .extend(cs.iter().cloned());
        }
        let domain_ids: BTreeMap<&String, Vec<u32>> = domains
            .iter()
            .map(|(d, cs)| (d, cs.iter().map(|k| self.interner.intern(k)).collect()))
            .collect();
        self.lists = c
            .domain_names
            .iter()
            .map(|d| domain_ids.get(d).cloned().unwrap_or_default())
            .collect();

        // Atoms mentioned in the database, then every atom of open predicates.
        let mentioned: Vec<&Atom> = self
            .db
            .positive
            .iter()
            .chain(&self.db.negative)
            .chain(&self.db.hidden)
            .collect();
        for atom in mentioned {
            let pred = *c.pred_index.get(&atom.predicate).ok_or_else(|| {
                ModelError::UndeclaredPredicate {
                    line: 0,
                    name: atom.predicate.clone(),
                }
            })?;
            let args: Vec<u32> = atom
                .args
                .iter()
                .map(|t| {
                    self.interner
                        .intern(t.as_constant().expect("database atoms are ground"))
                })
                .collect();
            self.create(pred, &args)?;
        }
        for decl in m.predicates() {
            let pred = c.pred_index[&decl.name];
            if decl.fuzzy || c.pred_closed[pred] {
                continue;
            }
            let lists: Vec<&[u32]> = decl
                .domains
                .iter()
                .map(|d| domain_ids.get(d).map(Vec::as_slice).unwrap_or(&[]))
                .collect();
            if lists.iter().any(|l| l.is_empty()) {
                continue;
            }
            let mut idx = vec![0usize; lists.len()];
            'tuples: loop {
                let args: Vec<u32> = idx.iter().zip(&lists).map(|(&i, l)| l[i]).collect();
                self.create(pred, &args)?;
                for k in (0..idx.len()).rev() {
                    idx[k] += 1;
                    if idx[k] < lists[k].len() {
                        continue 'tuples;
                    }
                    idx[k] = 0;
                }
                break;
            }
        }
        self.build_support();

        for plan in &c.plans {
            self.ground_formula(plan)?;
        }

        for f in &mut self.factors {
            f.entries.sort_by_key(|e| (e.formula, e.index));
            let mut merged: Vec<FeatureEntry<T>> = Vec::with_capacity(f.entries.len());
            for e in f.entries.drain(..) {
                match merged.last_mut() {
                    Some(last) if last.formula == e.formula && last.index == e.index => {
                        last.value = last.value + e.value
                    }
                    _ => merged.push(e),
                }
            }
            f.entries = merged;
        }

        let n_free = self.free.len();
        let mut var_factors = vec![Vec::new(); n_free];
        let mut uf: Vec<usize> = (0..n_free).collect();
        fn find(uf: &mut [usize], mut x: usize) -> usize {
            while uf[x] != x {
                uf[x] = uf[uf[x]];
                x = uf[x];
            }
            x
        }
        for (fi, f) in self.factors.iter().enumerate() {
            for &v in &f.vars {
                var_factors[v].push(fi);
            }
            let r0 = find(&mut uf, f.vars[0]);
            for &v in &f.vars[1..] {
                let r = find(&mut uf, v);
                if r != r0 {
                    uf[r] = r0;
                }
            }
        }
        let mut comp_of: HashMap<usize, usize> = HashMap::new();
        let mut components: Vec<Vec<usize>> = Vec::new();
        for v in 0..n_free {
            let r = find(&mut uf, v);
            let k = *comp_of.entry(r).or_insert_with(|| {
                components.push(Vec::new());
                components.len() - 1
            });
            components[k].push(v);
        }

        let observed = self
            .free
            .iter()
            .map(|&a| self.db.holds(&self.atoms[a]))
            .collect();
        let atom_index = self
            .atoms
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect();
        Ok(GroundMrf {
            mode: self.opts.mode,
            formulas: if self.opts.discard_formulas {
                Arc::from(Vec::new())
            } else {
                Arc::clone(
                    c.formulas
                        .get_or_init(|| m.formulas.iter().map(|f| f.formula.clone()).collect()),
                )
            },
            weights: m.weights(),
            constants: self.interner.names,
            atoms: self.atoms,
            atom_index,
            states: self.states,
            free: self.free,
            observed,
            ground: self.ground,
            groundings: self.groundings,
            constant: self.constant,
            factors: self.factors,
            var_factors,
            components,
        })
    }

    fn ground_formula(&mut self, plan: &Plan<T>) -> Result<(), GroundingError> {
        let sizes: Vec<u64> = plan
            .order
            .iter()
            .map(|&v| self.lists[plan.var_domain[v]].len() as u64)
            .collect();
        let total = sizes.iter().copied().fold(1, u64::saturating_mul);
        if total == 0 {
            return Ok(());
        }
        let mut below = vec![1u64; sizes.len()];
        for level in (0..sizes.len().saturating_sub(1)).rev() {
            below[level] = below[level + 1].saturating_mul(sizes[level + 1]);
        }
        let mut binding = vec![UNBOUND; plan.var_domain.len()];
        let mut path = Path {
            min: T::one(),
            free: Vec::new(),
        };
        for &ci in &plan.checks[plan.order.len()] {
            if !self.apply(plan, ci, &binding, &mut path)? {
                self.groundings[plan.fi] = self.groundings[plan.fi].saturating_add(total);
                return Ok(());
            }
        }
        self.descend(plan, &below, 0, &mut binding, &mut path)
    }

    /// Folds conjunct `ci` into `path`; false when it is pinned to 0.
    fn apply(
        &mut self,
        plan: &Plan<T>,
        ci: usize,
        binding: &[u32],
        path: &mut Path<T>,
    ) -> Result<bool, GroundingError> {
        let alive = match &plan.literals {
            Some(lits) => match lits[ci] {
                Literal::NotEquals(a, b) => resolve_ref(a, binding) != resolve_ref(b, binding),
                Literal::Atom { pattern, positive } => {
                    match self.pattern_state(&plan.patterns[pattern], binding)? {
                        AtomState::Free(v) => {
                            path.free.push((v, positive));
                            true
                        }
                        AtomState::Evidence(x) | AtomState::Similarity(x) => {
                            let val = if positive { x } else { T::one() - x };
                            path.min = path.min.min(val);
                            val > T::zero()
                        }
                    }
                }
            },
            None => {
                let mut err = None;
                let value = {
                    let patterns = &plan.patterns;
                    let mut leaf = |p: usize| -> Option<T> {
                        match self.pattern_state(&patterns[p], binding) {
                            Ok(s) => s.pinned(),
                            Err(e) => {
                                err = Some(e);
                                None
                            }
                        }
                    };
                    partial_eval(&plan.conjuncts[ci], binding, &mut leaf)
                };
                if let Some(e) = err {
                    return Err(e);
                }
                value != Some(T::zero())
            }
        };
        if !alive && plan.weight.is_hard() {
            return Err(GroundingError::HardUnsatisfiable(
                self.describe_binding(plan, binding),
            ));
        }
        Ok(alive)
    }

    fn describe_binding(&self, plan: &Plan<T>, binding: &[u32]) -> String {
        let formula = &self.c.m.formulas[plan.fi].formula;
        let map: HashMap<String, String> = formula
            .variables()
            .into_iter()
            .zip(binding)
            .filter(|(_, &k)| k != UNBOUND)
            .map(|(v, &k)| (v, self.interner.names[k as usize].clone()))
            .collect();
        formula.substitute(&map).to_string()
    }

    fn descend(
        &mut self,
        plan: &Plan<T>,
        below: &[u64],
        level: usize,
        binding: &mut Vec<u32>,
        path: &mut Path<T>,
    ) -> Result<(), GroundingError> {
        if level == plan.order.len() {
            return self.leaf(plan, binding, path);
        }
        let var = plan.order[level];
        let domain = plan.var_domain[var];
        let source = match plan.generators[level] {
            Some((p, pos)) => {
                let list = self.support_for(&plan.patterns[p], pos, binding);
                let n = list.map_or(0, |l| self.support_lists[l].len());
                let skipped = (self.lists[domain].len() - n) as u64;
                self.groundings[plan.fi] =
                    self.groundings[plan.fi].saturating_add(skipped.saturating_mul(below[level]));
                list.map(Candidates::Support)
            }
            None => Some(Candidates::Domain(domain)),
        };
        let Some(source) = source else {
            return Ok(());
        };
        let count = match source {
            Candidates::Support(l) => self.support_lists[l].len(),
            Candidates::Domain(d) => self.lists[d].len(),
        };
        for idx in 0..count {
            let k = match source {
                Candidates::Support(l) => self.support_lists[l][idx],
                Candidates::Domain(d) => self.lists[d][idx],
            };
            binding[var] = k;
            let (min, len) = (path.min, path.free.len());
            let mut alive = true;
            for &ci in &plan.checks[level] {
                if !self.apply(plan, ci, binding, path)? {
                    alive = false;
                    break;
                }
            }
            if alive {
                self.descend(plan, below, level + 1, binding, path)?;
            } else {
                self.groundings[plan.fi] = self.groundings[plan.fi].saturating_add(below[level]);
            }
            path.min = min;
            path.free.truncate(len);
        }
        binding[var] = UNBOUND;
        Ok(())
    }

    fn leaf(
        &mut self,
        plan: &Plan<T>,
        binding: &[u32],
        path: &Path<T>,
    ) -> Result<(), GroundingError> {
        self.groundings[plan.fi] += 1;
        let record = !self.opts.discard_formulas;
        let mut atom_ids = Vec::new();
        if record || plan.literals.is_none() {
            for pat in &plan.patterns {
                let args = self.bind(pat, binding);
                let id = self.create(pat.predicate, &args);
                self.args = args;
                atom_ids.push(id?);
            }
        }
        if record {
            let mut order = Vec::new();
            for c in &plan.conjuncts {
                node_atoms(c, &mut order);
            }
            self.ground.push(GroundFormula {
                parent: plan.fi,
                binding: binding.to_vec(),
                atoms: order.iter().map(|&p| atom_ids[p]).collect(),
            });
        }

        if plan.literals.is_some() {
            let mut lits = std::mem::take(&mut self.lits);
            lits.clear();
            lits.extend_from_slice(&path.free);
            lits.sort_unstable();
            lits.dedup();
            if lits.windows(2).any(|w| w[0].0 == w[1].0) {
                self.lits = lits;
                // p ^ !p: zero in every world.
                if plan.weight.is_hard() {
                    return Err(GroundingError::HardUnsatisfiable(
                        self.describe_binding(plan, binding),
                    ));
                }
                return Ok(());
            }
            let mut vars = std::mem::take(&mut self.vars);
            vars.clear();
            vars.extend(lits.iter().map(|l| l.0));
            let index = lits
                .iter()
                .enumerate()
                .fold(0usize, |acc, (bit, l)| acc | ((l.1 as usize) << bit));
            self.lits = lits;
            let min = path.min;
            let r = self.add_grounding(plan, binding, &vars, |a| {
                if a == index {
                    min
                } else {
                    T::zero()
                }
            });
            self.vars = vars;
            return r;
        }

        let mut vars: Vec<usize> = atom_ids
            .iter()
            .filter_map(|&a| match self.states[a] {
                AtomState::Free(v) => Some(v),
                _ => None,
            })
            .collect();
        vars.sort_unstable();
        vars.dedup();
        let states = &self.states;
        let table: Vec<T> = (0..1usize << vars.len())
            .map(|assignment| {
                let leaf = |p: usize| -> T {
                    match states[atom_ids[p]] {
                        AtomState::Free(v) => {
                            let bit = vars.binary_search(&v).unwrap();
                            if (assignment >> bit) & 1 == 1 {
                                T::one()
                            } else {
                                T::zero()
                            }
                        }
                        AtomState::Evidence(x) | AtomState::Similarity(x) => x,
                    }
                };
                plan.conjuncts
                    .iter()
                    .map(|c| full_eval(c, binding, &leaf))
                    .fold(T::one(), T::min)
            })
            .collect();
        self.add_grounding(plan, binding, &vars, |a| table[a])
    }

    fn add_grounding(
        &mut self,
        plan: &Plan<T>,
        binding: &[u32],
        vars: &[usize],
        value: impl Fn(usize) -> T,
    ) -> Result<(), GroundingError> {
        let size = 1usize << vars.len();
        match plan.weight {
            Weight::Soft(_) => {
                if vars.is_empty() {
                    self.constant[plan.fi] = self.constant[plan.fi] + value(0);
                    return Ok(());
                }
                let f = self.factor_for(vars);
                for index in 0..size {
                    let v = value(index);
                    if v != T::zero() {
                        self.factors[f].entries.push(FeatureEntry {
                            formula: plan.fi,
                            index,
                            value: v,
                        });
                    }
                }
            }
            Weight::Hard => {
                let ok: Vec<bool> = (0..size).map(|a| value(a) >= T::one()).collect();
                if ok.iter().all(|&b| !b) {
                    return Err(GroundingError::HardUnsatisfiable(
                        self.describe_binding(plan, binding),
                    ));
                }
                if ok.iter().any(|&b| !b) {
                    let f = self.factor_for(vars);
                    let allowed = self.factors[f]
                        .allowed
                        .get_or_insert_with(|| vec![true; size]);
                    for (a, o) in allowed.iter_mut().zip(ok) {
                        *a &= o;
                    }
                    if allowed.iter().all(|&b| !b) {
                        return Err(GroundingError::HardUnsatisfiable(
                            self.describe_binding(plan, binding),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn factor_for(&mut self, vars: &[usize]) -> usize {
        if let Some(&f) = self.factor_keys.get(vars) {
            return f;
        }
        self.factors.push(Factor {
            vars: vars.to_vec(),
            entries: Vec::new(),
            allowed: None,
        });
        self.factor_keys
            .insert(vars.to_vec(), self.factors.len() - 1);
        self.factors.len() - 1
    }
}

/// Grounds an expanded MLN against one database.
///
/// Domains are the declared members, the constants of the formulas and the
/// constants of `db`. In fuzzy mode every `is_a(s, c)` atom is pinned to
/// `sims.similarity(s, c)`; in FOL mode to 1 if `s` and `c` name the same
/// concept and 0 otherwise.
pub fn ground<T: Real>(
    m: &Mln<T>,
    db: &Database,
    sims: &dyn SimilaritySource<T>,
    opts: &GroundingOptions,
) -> Result<GroundMrf<T>, GroundingError> {
    Compiled::new(m, opts)?.ground(db, sims)
}

impl<T: Real> GroundMrf<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom_id(&self, atom: &Atom) -> Option<usize> {
        self.atom_index.get(atom).copied()
    }

    pub fn state(&self, atom: usize) -> AtomState<T> {
        self.states[atom]
    }

    /// Value an atom has in every world, if it is not free.
    pub fn pinned_value(&self, atom: &Atom) -> Option<T> {
        self.atom_id(atom).and_then(|i| self.states[i].pinned())
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// The atom behind free variable `v`.
    pub fn free_atom(&self, v: usize) -> &Atom {
        &self.atoms[self.free[v]]
    }

    pub fn free_index(&self, atom: &Atom) -> Option<usize> {
        match self.states[self.atom_id(atom)?] {
            AtomState::Free(v) => Some(v),
            _ => None,
        }
    }

    pub fn free_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.free.iter().map(|&a| &self.atoms[a])
    }

    /// Closed-world truth of each free atom in the grounded database.
    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    /// Source formulas of the recorded ground formulas; empty when recording
    /// was switched off.
    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn weights(&self) -> &[Weight<T>] {
        &self.weights
    }

    /// Soft weights, with 0 in place of hard formulas.
    pub fn soft_weights(&self) -> Vec<T> {
        self.weights
            .iter()
            .map(|w| w.soft().unwrap_or_else(T::zero))
            .collect()
    }

    pub fn set_weights(&mut self, weights: &[T]) {
        for (w, &n) in self.weights.iter_mut().zip(weights) {
            if let Weight::Soft(_) = w {
                *w = Weight::Soft(n);
            }
        }
    }

    pub fn constant_name(&self, id: u32) -> &str {
        &self.constants[id as usize]
    }

    pub fn factors(&self) -> &[Factor<T>] {
        &self.factors
    }

    pub fn var_factors(&self, v: usize) -> &[usize] {
        &self.var_factors[v]
    }

    /// Free variables grouped into independent components.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    /// Recorded ground formulas: every grounding not proven zero, unless
    /// recording was switched off.
    pub fn ground_formulas(&self) -> &[GroundFormula] {
        &self.ground
    }

    /// Number of groundings of each formula, including those proven zero.
    pub fn grounding_counts(&self) -> &[u64] {
        &self.groundings
    }

    pub fn num_groundings(&self) -> u64 {
        self.groundings.iter().sum()
    }

    /// Per-formula sums of ground formulas that do not depend on the world.
    pub fn constant_features(&self) -> &[T] {
        &self.constant
    }

    /// The recorded ground formula `j` with its variables substituted.
    pub fn ground_formula(&self, j: usize) -> Formula {
        let g = &self.ground[j];
        let f = &self.formulas[g.parent];
        let binding: HashMap<String, String> = f
            .variables()
            .into_iter()
            .zip(
                g.binding
                    .iter()
                    .map(|&c| self.constants[c as usize].clone()),
            )
            .collect();
        f.substitute(&binding)
    }

    /// Per-formula sum of fuzzy truth values over all groundings in world `x`.
    pub fn feature_counts(&self, x: &[bool]) -> Vec<T> {
        let mut n = self.constant.clone();
        for f in &self.factors {
            let a = f.index_of(x);
            for e in f.entries.iter().filter(|e| e.index == a) {
                n[e.formula] = n[e.formula] + e.value;
            }
        }
        n
    }

    pub fn satisfies_hard(&self, x: &[bool]) -> bool {
        self.factors
            .iter()
            .all(|f| f.allowed.as_ref().is_none_or(|ok| ok[f.index_of(x)]))
    }

    /// `Σ_j ŵ_j · π_x(F̂_j)` under `weights`, or `-inf` if `x` violates a hard formula.
    pub fn score_with(&self, weights: &[T], x: &[bool]) -> T {
        if !self.satisfies_hard(x) {
            return T::neg_infinity();
        }
        let n = self.feature_counts(x);
        let terms: Vec<T> = n.iter().zip(weights).map(|(&c, &w)| c * w).collect();
        crate::scalar::pairwise_sum(&terms)
    }

    /// Score of world `x`, an assignment to the free atoms, under the model weights.
    pub fn world_score(&self, x: &[bool]) -> T {
        self.score_with(&self.soft_weights(), x)
    }

    /// Per-factor log-potential tables for `weights`; hard-violating entries are `-inf`.
    pub fn potentials(&self, weights: &[T]) -> Vec<Vec<T>> {
        self.factors
            .iter()
            .map(|f| {
                let mut theta = vec![T::zero(); f.size()];
                for e in &f.entries {
                    theta[e.index] = theta[e.index] + weights[e.formula] * e.value;
                }
                if let Some(ok) = &f.allowed {
                    for (t, &o) in theta.iter_mut().zip(ok) {
                        if !o {
                            *t = T::neg_infinity();
                        }
                    }
                }
                theta
            })
            .collect()
    }

    /// Weighted sum of the constant features; the same in every world.
    pub fn constant_score(&self, weights: &[T]) -> T {
        self.constant
            .iter()
            .zip(weights)
            .fold(T::zero(), |acc, (&c, &w)| acc + c * w)
    }

    /// Full truth assignment for `x`: free atoms from `x`, pinned atoms from evidence.
    pub fn world(&self, x: &[bool]) -> World<T> {
        let mut w = World::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            let v = match self.states[i] {
                AtomState::Free(k) => {
                    if x[k] {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
                AtomState::Evidence(v) | AtomState::Similarity(v) => v,
            };
            w.set(atom.clone(), v).expect("truth values lie in [0, 1]");
        }
        w
    }

    /// Diagnostic dump: `<weight>\t<formula>\t<pinned atom=value ...>` per
    /// recorded ground formula.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (j, g) in self.ground.iter().enumerate() {
            let weight = match self.weights[g.parent] {
                Weight::Soft(w) => w.to_string(),
                Weight::Hard => "hard".to_string(),
            };
            let mut seen = BTreeSet::new();
            let pinned: Vec<String> = g
                .atoms
                .iter()
                .filter(|a| seen.insert(**a))
                .filter_map(|&a| {
                    self.states[a]
                        .pinned()
                        .map(|v| format!("{}={}", self.atoms[a], v))
                })
                .collect();
            out.push_str(&format!(
                "{weight}\t{}\t{}\n",
                self.ground_formula(j),
                pinned.join(" ")
            ));
        }
        out
    }
}
