//! Marginal and MAP inference over a ground MRF.

mod exact;
mod gibbs;
mod report;

pub use exact::{exact, exact_with, Exact, Layout, DEFAULT_CAP};
pub use gibbs::{gibbs, Gibbs, GibbsOptions};
pub use report::{heatmap_dot, MarginalResult, Method};

use thiserror::Error;

use crate::evidence::Database;
use crate::grounding::{ground, AtomState, GroundMrf, GroundingError, GroundingOptions};
use crate::logic::{parse_formula, Atom, Formula, Term};
use crate::model::Mln;
use crate::scalar::Real;
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InferenceError {
    #[error("component with {size} free atoms exceeds the enumeration cap of {cap}; use sampling")]
    CapExceeded { size: usize, cap: usize },
    #[error("target {0} is pinned evidence, not a query variable")]
    PinnedTarget(String),
    #[error("target {0} does not occur in the ground network")]
    UnknownAtom(String),
    #[error("target pattern '{0}' matches no free atom")]
    NoMatch(String),
    #[error("invalid target pattern '{pattern}': {message}")]
    Pattern { pattern: String, message: String },
    #[error("word '{0}' has no candidate senses")]
    UnknownWord(String),
    #[error("no world satisfies the hard formulas")]
    Unsatisfiable,
    #[error("no state satisfying the hard formulas found after {0} random restarts")]
    NoValidState(usize),
    #[error("the network has no free atoms to sample")]
    NoFreeAtoms,
    #[error(transparent)]
    Grounding(#[from] GroundingError),
}

/// Resolves a target pattern such as `flies(Fred)` or `instance_of(W1, s)`.
///
/// A ground pattern must name a free atom. A pattern with variables expands
/// to every free atom it matches (a repeated variable must bind consistently).
pub fn resolve_targets<T: Real>(
    g: &GroundMrf<T>,
    pattern: &str,
) -> Result<Vec<usize>, InferenceError> {
    let bad = |message: String| InferenceError::Pattern {
        pattern: pattern.to_string(),
        message,
    };
    let target = match parse_formula(pattern).map_err(|e| bad(e.to_string()))? {
        Formula::Atom(a) => a,
        _ => return Err(bad("expected a single atom".into())),
    };
    if target.is_ground() {
        let id = g
            .atom_id(&target)
            .ok_or_else(|| InferenceError::UnknownAtom(target.to_string()))?;
        return match g.state(id) {
            AtomState::Free(v) => Ok(vec![v]),
            _ => Err(InferenceError::PinnedTarget(target.to_string())),
        };
    }
    let matches: Vec<usize> = (0..g.num_free())
        .filter(|&v| pattern_matches(&target, g.free_atom(v)))
        .collect();
    if matches.is_empty() {
        return Err(InferenceError::NoMatch(pattern.to_string()));
    }
    Ok(matches)
}

fn pattern_matches(pattern: &Atom, atom: &Atom) -> bool {
    if pattern.predicate != atom.predicate || pattern.args.len() != atom.args.len() {
        return false;
    }
    let mut binding: Vec<(&str, &Term)> = Vec::new();
    for (p, a) in pattern.args.iter().zip(&atom.args) {
        match p {
            Term::Constant(_) => {
                if p != a {
                    return false;
                }
            }
            Term::Variable(v) | Term::Template(v) => match binding.iter().find(|(n, _)| n == v) {
                Some((_, bound)) if *bound != a => return false,
                Some(_) => {}
                None => binding.push((v, a)),
            },
        }
    }
    true
}

/// Probability of `atom`: its marginal if free, its pinned value otherwise.
pub fn probability<T: Real>(g: &GroundMrf<T>, marginals: &[T], atom: &Atom) -> Option<T> {
    match g.state(g.atom_id(atom)?) {
        AtomState::Free(v) => Some(marginals[v]),
        AtomState::Evidence(x) | AtomState::Similarity(x) => Some(x),
    }
}

/// Exact marginals of the free atoms matched by `patterns`.
pub fn exact_marginals<T: Real>(
    g: &GroundMrf<T>,
    patterns: &[&str],
    cap: usize,
) -> Result<MarginalResult<T>, InferenceError> {
    let mut targets = Vec::new();
    for p in patterns {
        targets.extend(resolve_targets(g, p)?);
    }
    let result = exact(g, &g.soft_weights(), cap)?;
    Ok(MarginalResult::new(
        patterns.join(", "),
        Method::Exact,
        g,
        &targets,
        &result.marginals,
    ))
}

/// `ln Z` of the network under its own weights.
pub fn log_partition<T: Real>(g: &GroundMrf<T>, cap: usize) -> Result<T, InferenceError> {
    Ok(exact(g, &g.soft_weights(), cap)?.log_z)
}

/// Highest-scoring assignment to the free atoms. Exhaustive within the cap,
/// ties going to the lexicographically smallest assignment (false < true);
/// beyond the cap, the best state visited by a Gibbs run.
pub fn map_state<T: Real>(
    g: &GroundMrf<T>,
    cap: usize,
    fallback: &GibbsOptions,
) -> Result<Vec<bool>, InferenceError> {
    match exact(g, &g.soft_weights(), cap) {
        Ok(e) => Ok(e.map),
        Err(InferenceError::CapExceeded { .. }) => Ok(gibbs(g, &g.soft_weights(), fallback)?.best),
        Err(e) => Err(e),
    }
}

/// Posterior over the candidate senses of `word`: the probability of each
/// `instance_of(word, s)` atom (free or asserted), normalized over the
/// candidates and sorted by decreasing probability, then by sense id.
pub fn sense_posterior<T: Real>(
    g: &GroundMrf<T>,
    marginals: &[T],
    sense_predicate: &str,
    word: &str,
) -> Result<Vec<(String, T)>, InferenceError> {
    let mut scores: Vec<(String, T)> = Vec::new();
    for (i, atom) in g.atoms().iter().enumerate() {
        if atom.predicate != sense_predicate
            || atom.args.len() != 2
            || atom.args[0].as_constant() != Some(word)
        {
            continue;
        }
        let p = match g.state(i) {
            AtomState::Free(v) => marginals[v],
            AtomState::Evidence(x) if x > T::zero() => x,
            _ => continue,
        };
        let sense = atom.args[1].as_constant().unwrap_or_default().to_string();
        scores.push((sense, p));
    }
    if scores.is_empty() {
        return Err(InferenceError::UnknownWord(word.to_string()));
    }
    normalize_ranking(&mut scores);
    Ok(scores)
}

fn normalize_ranking<T: Real>(scores: &mut [(String, T)]) {
    let total = crate::scalar::pairwise_sum(&scores.iter().map(|s| s.1).collect::<Vec<_>>());
    let n = T::from_usize(scores.len()).unwrap();
    for s in scores.iter_mut() {
        s.1 = if total > T::zero() {
            s.1 / total
        } else {
            T::one() / n
        };
    }
    scores.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
}

/// Experimental: scores every taxonomy node as a hypothetical sense of
/// `word`. For each node `n` the word's candidates are replaced by the single
/// hidden atom `instance_of(word, n)`, the network is grounded with
/// similarities to `n`, and its marginal is recorded. The scores are
/// normalized over all nodes.
pub fn spread_posterior<T: Real>(
    m: &Mln<T>,
    db: &Database,
    taxonomy: &Taxonomy,
    opts: &GroundingOptions,
    sense_predicate: &str,
    word: &str,
    cap: usize,
) -> Result<Vec<(String, T)>, InferenceError> {
    let mut base = db.clone();
    let is_word_sense = |a: &Atom| {
        a.predicate == sense_predicate && a.args.first().and_then(Term::as_constant) == Some(word)
    };
    base.positive.retain(|a| !is_word_sense(a));
    base.negative.retain(|a| !is_word_sense(a));
    base.hidden.retain(|a| !is_word_sense(a));
    let mut scores = Vec::with_capacity(taxonomy.len());
    for c in taxonomy.concepts() {
        let name = taxonomy.name(c).to_string();
        let mut d = base.clone();
        let atom = Atom::ground(sense_predicate, &[word, name.as_str()]);
        d.hidden.insert(atom.clone());
        if let Some(decl) = m.predicate(sense_predicate) {
            for (arg, dom) in [word, name.as_str()].iter().zip(&decl.domains) {
                d.constants
                    .entry(dom.clone())
                    .or_default()
                    .insert(arg.to_string());
            }
        }
        let g = ground(m, &d, taxonomy, opts)?;
        let v = g
            .free_index(&atom)
            .ok_or_else(|| InferenceError::UnknownAtom(atom.to_string()))?;
        let e = exact(&g, &g.soft_weights(), cap)?;
        scores.push((name, e.marginals[v]));
    }
    normalize_ranking(&mut scores);
    Ok(scores)
}
