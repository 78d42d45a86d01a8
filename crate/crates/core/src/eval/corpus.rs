use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::evidence::Database;
use crate::logic::Atom;
use crate::model::Mln;
use crate::scalar::Real;
use crate::taxonomy::{ConceptId, Taxonomy};

pub const DEFAULT_TEMPLATE: &str = include_str!("../../data/wsd-template.mln");
const DEFAULT_TAXONOMY: &str = include_str!("../../data/wsd-taxonomy.txt");
const DEFAULT_GENERATOR: &str = include_str!("../../data/wsd-generator.json");

/// The bundled taxonomy the default generator config refers to.
pub fn default_taxonomy() -> Taxonomy {
    Taxonomy::parse_str(DEFAULT_TAXONOMY).expect("bundled taxonomy is valid")
}

pub fn default_generator_config() -> GeneratorConfig {
    serde_json::from_str(DEFAULT_GENERATOR).expect("bundled generator config is valid")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WsdWord {
    pub token: String,
    pub pos: String,
    pub gold: String,
    pub candidates: Vec<String>,
}

/// One annotated instruction: a verb and its role fillers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WsdExample {
    pub verb: String,
    pub tokens: Vec<WsdWord>,
}

impl WsdExample {
    /// Constant naming the `i`-th word in databases.
    pub fn word_constant(i: usize) -> String {
        format!("W{i}")
    }

    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<(), String> {
        for w in &self.tokens {
            if w.candidates.len() < 2 {
                return Err(format!(
                    "word '{}' has fewer than two candidate senses",
                    w.token
                ));
            }
            if !w.candidates.contains(&w.gold) {
                return Err(format!(
                    "gold sense {} of '{}' is not a candidate",
                    w.gold, w.token
                ));
            }
            if let Some(c) = w.candidates.iter().find(|c| taxonomy.resolve(c).is_none()) {
                return Err(format!("sense {c} is not in the taxonomy"));
            }
        }
        Ok(())
    }

    /// Training database: parts of speech, gold senses asserted, every
    /// candidate hidden.
    pub fn training_db<T: Real>(&self, m: &Mln<T>) -> Result<Database, EvalError> {
        let mut db = self.test_db(m)?;
        for (i, w) in self.tokens.iter().enumerate() {
            db.assert_true(
                Atom::ground("instance_of", &[&Self::word_constant(i), &w.gold]),
                m,
            )?;
        }
        Ok(db)
    }

    /// Test database: parts of speech and hidden candidates only.
    pub fn test_db<T: Real>(&self, m: &Mln<T>) -> Result<Database, EvalError> {
        let mut db = Database::new();
        for (i, w) in self.tokens.iter().enumerate() {
            let word = Self::word_constant(i);
            db.assert_true(Atom::ground("has_pos", &[&word, &w.pos]), m)?;
            for c in &w.candidates {
                db.mark_hidden(Atom::ground("instance_of", &[&word, c]), m)?;
            }
        }
        Ok(db)
    }
}

/// Reads one JSON example per line; blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<WsdExample>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let err = |message: String| EvalError::Corpus {
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(mut out: W, examples: &[WsdExample]) -> std::io::Result<()> {
    for e in examples {
        writeln!(
            out,
            "{}",
            serde_json::to_string(e).expect("examples serialize")
        )?;
    }
    Ok(())
}

/// A verb frame: the verb's sense and one concept subtree per role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub verb: String,
    pub sense: String,
    pub roles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub examples_per_verb: usize,
    pub candidates_per_word: usize,
    /// Subtrees supplying wrong senses for nouns.
    pub noun_distractors: Vec<String>,
    /// Subtrees supplying wrong senses for verbs.
    pub verb_distractors: Vec<String>,
    pub frames: Vec<FrameConfig>,
}

fn lemma(id: &str) -> &str {
    id.split('.').next().unwrap_or(id)
}

fn leaves_under(t: &Taxonomy, root: &str) -> Result<Vec<ConceptId>, EvalError> {
    let r = t
        .resolve(root)
        .ok_or_else(|| EvalError::Generator(format!("unknown concept {root}")))?;
    let mut out: Vec<ConceptId> = t
        .descendants(r)
        .into_iter()
        .filter(|&c| c != r && t.is_leaf(c))
        .collect();
    out.sort_by(|a, b| t.name(*a).cmp(t.name(*b)));
    Ok(out)
}

fn pool(t: &Taxonomy, roots: &[String]) -> Result<Vec<ConceptId>, EvalError> {
    let mut set = BTreeSet::new();
    for r in roots {
        set.extend(leaves_under(t, r)?);
    }
    let mut v: Vec<ConceptId> = set.into_iter().collect();
    v.sort_by(|a, b| t.name(*a).cmp(t.name(*b)));
    Ok(v)
}

/// Samples `examples_per_verb` examples per frame.
///
/// Role fillers are leaves of the role's subtree picked greedily to keep
/// the filler distribution as flat as possible (maximum entropy): each pick
/// is a least-used leaf, ties broken at random. Each word gets
/// `candidates_per_word - 1` distinct distractor senses drawn from the
/// distractor subtrees, which must be disjoint from the frame's subtrees.
pub fn generate_corpus(
    t: &Taxonomy,
    cfg: &GeneratorConfig,
    seed: u64,
) -> Result<Vec<WsdExample>, EvalError> {
    if cfg.candidates_per_word < 2 {
        return Err(EvalError::Generator(
            "candidates_per_word must be at least 2".into(),
        ));
    }
    let nouns = pool(t, &cfg.noun_distractors)?;
    let verbs = pool(t, &cfg.verb_distractors)?;
    for (name, p) in [("noun", &nouns), ("verb", &verbs)] {
        if p.len() < cfg.candidates_per_word - 1 {
            return Err(EvalError::Generator(format!(
                "{name} distractor pool has {} senses, need {}",
                p.len(),
                cfg.candidates_per_word - 1
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for frame in &cfg.frames {
        let verb_sense = t
            .resolve(&frame.sense)
            .ok_or_else(|| EvalError::Generator(format!("unknown concept {}", frame.sense)))?;
        let mut role_pools = Vec::new();
        for role in &frame.roles {
            let leaves = leaves_under(t, role)?;
            if leaves.len() < 2 {
                return Err(EvalError::Generator(format!(
                    "subtree {role} has {} leaves; at least 2 are needed for a diverse corpus",
                    leaves.len()
                )));
            }
            if let Some(d) = leaves.iter().find(|l| nouns.contains(l)) {
                return Err(EvalError::Generator(format!(
                    "distractor {} lies inside role subtree {role}",
                    t.name(*d)
                )));
            }
            role_pools.push(leaves);
        }
        if verbs.contains(&verb_sense) {
            return Err(EvalError::Generator(format!(
                "verb sense {} is also a distractor",
                frame.sense
            )));
        }
        let mut usage: Vec<BTreeMap<ConceptId, usize>> = role_pools
            .iter()
            .map(|p| p.iter().map(|&c| (c, 0)).collect())
            .collect();
        for _ in 0..cfg.examples_per_verb {
            let mut tokens = Vec::with_capacity(frame.roles.len() + 1);
            tokens.push(word(
                t,
                verb_sense,
                "V",
                &verbs,
                cfg.candidates_per_word,
                &mut rng,
            ));
            for used in usage.iter_mut() {
                let least = *used.values().min().expect("non-empty pool");
                let ties: Vec<ConceptId> = used
                    .iter()
                    .filter(|(_, &n)| n == least)
                    .map(|(&c, _)| c)
                    .collect();
                let pick = ties[rng.gen_range(0..ties.len())];
                *used.get_mut(&pick).unwrap() += 1;
                tokens.push(word(
                    t,
                    pick,
                    "N",
                    &nouns,
                    cfg.candidates_per_word,
                    &mut rng,
                ));
            }
            out.push(WsdExample {
                verb: frame.verb.clone(),
                tokens,
            });
        }
    }
    Ok(out)
}

fn word(
    t: &Taxonomy,
    gold: ConceptId,
    pos: &str,
    distractors: &[ConceptId],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> WsdWord {
    let mut candidates: Vec<String> = distractors
        .choose_multiple(rng, k - 1)
        .map(|&c| t.name(c).to_string())
        .collect();
    candidates.push(t.name(gold).to_string());
    candidates.sort();
    WsdWord {
        token: lemma(t.name(gold)).to_string(),
        pos: pos.to_string(),
        gold: t.name(gold).to_string(),
        candidates,
    }
}
