//! Word-sense disambiguation evaluation: inverse k-fold splits, micro F1,
//! a synthetic corpus generator and the FOL-versus-fuzzy experiment.

mod corpus;
mod experiment;

pub use corpus::{
    default_generator_config, default_taxonomy, generate_corpus, read_corpus, write_corpus,
    FrameConfig, GeneratorConfig, WsdExample, WsdWord, DEFAULT_TEMPLATE,
};
pub use experiment::{
    run_experiment, Cell, ExperimentConfig, ExperimentResult, FoldOutcome, Prediction,
    EVAL_MAX_ITERATIONS,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::evidence::EvidenceError;
use crate::grounding::GroundingError;
use crate::inference::InferenceError;
use crate::learning::LearningError;
use crate::model::ModelError;

pub const BLOCKS: usize = 10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least {BLOCKS} examples, got {0}")]
    TooFewExamples(usize),
    #[error("invalid split '{0}': expected a/b with a + b = 10 and 1 <= a <= 9")]
    Split(String),
    #[error("prediction and gold keys differ")]
    KeyMismatch,
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("generator: {0}")]
    Generator(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Learning(#[from] LearningError),
}

/// `a/b`: train on `a` of ten blocks, test on the other `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplitSpec {
    train_blocks: usize,
}

impl SplitSpec {
    pub fn new(train_blocks: usize) -> Result<Self, EvalError> {
        if (1..BLOCKS).contains(&train_blocks) {
            Ok(SplitSpec { train_blocks })
        } else {
            Err(EvalError::Split(format!(
                "{train_blocks}/{}",
                BLOCKS as isize - train_blocks as isize
            )))
        }
    }

    pub fn train_blocks(self) -> usize {
        self.train_blocks
    }

    pub fn test_blocks(self) -> usize {
        BLOCKS - self.train_blocks
    }

    /// `1/9, 2/8, ..., 9/1`.
    pub fn all() -> Vec<SplitSpec> {
        (1..BLOCKS).map(|a| SplitSpec { train_blocks: a }).collect()
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.train_blocks, self.test_blocks())
    }
}

impl FromStr for SplitSpec {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, EvalError> {
        let bad = || EvalError::Split(s.to_string());
        let (a, b) = s.split_once('/').ok_or_else(bad)?;
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a + b != BLOCKS {
            return Err(bad());
        }
        SplitSpec::new(a).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Ten cyclic rotations over a seeded shuffle of `0..n`, truncated to a
/// multiple of ten. Rotation `r` trains on blocks `r, r+1, ..., r+a-1`
/// (mod 10) and tests on the rest.
pub fn inverse_kfold_splits(n: usize, spec: SplitSpec, seed: u64) -> Result<Vec<Fold>, EvalError> {
    if n < BLOCKS {
        return Err(EvalError::TooFewExamples(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let size = n / BLOCKS;
    order.truncate(size * BLOCKS);
    let blocks: Vec<&[usize]> = order.chunks(size).collect();
    Ok((0..BLOCKS)
        .map(|r| {
            let mut fold = Fold {
                train: Vec::new(),
                test: Vec::new(),
            };
            for i in 0..BLOCKS {
                let offset = (i + BLOCKS - r) % BLOCKS;
                if offset < spec.train_blocks {
                    fold.train.extend_from_slice(blocks[i]);
                } else {
                    fold.test.extend_from_slice(blocks[i]);
                }
            }
            fold
        })
        .collect())
}

/// Micro-averaged F1 over per-key predictions. `None` is an abstention,
/// which lowers recall but not precision.
pub fn f1_score<K: Ord>(
    predicted: &BTreeMap<K, Option<String>>,
    gold: &BTreeMap<K, String>,
) -> Result<f64, EvalError> {
    if predicted.len() != gold.len() || !predicted.keys().all(|k| gold.contains_key(k)) {
        return Err(EvalError::KeyMismatch);
    }
    let (tp, made) = counts(predicted, gold);
    Ok(f1_from_counts(tp, made, gold.len()))
}

fn counts<K: Ord>(
    predicted: &BTreeMap<K, Option<String>>,
    gold: &BTreeMap<K, String>,
) -> (usize, usize) {
    let mut tp = 0;
    let mut made = 0;
    for (k, p) in predicted {
        if let Some(p) = p {
            made += 1;
            if gold.get(k) == Some(p) {
                tp += 1;
            }
        }
    }
    (tp, made)
}

/// F1 from true positives, predictions made and gold items.
pub fn f1_from_counts(tp: usize, predicted: usize, gold: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / predicted as f64;
    let r = tp as f64 / gold as f64;
    2.0 * p * r / (p + r)
}

/// FNV-1a, used to derive per-job seeds that do not depend on the platform.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_parse() {
        let s: SplitSpec = "1/9".parse().unwrap();
        assert_eq!((s.train_blocks(), s.test_blocks()), (1, 9));
        assert_eq!(s.to_string(), "1/9");
        assert!("0/10".parse::<SplitSpec>().is_err());
        assert!("3/6".parse::<SplitSpec>().is_err());
        assert!(SplitSpec::new(10).is_err());
    }

    #[test]
    fn fold_sizes() {
        for spec in SplitSpec::all() {
            let folds = inverse_kfold_splits(20, spec, 1).unwrap();
            assert_eq!(folds.len(), 10);
            for f in &folds {
                assert_eq!(f.train.len(), 2 * spec.train_blocks());
                assert_eq!(f.test.len(), 2 * spec.test_blocks());
            }
        }
        let folds = inverse_kfold_splits(10, SplitSpec::new(5).unwrap(), 0).unwrap();
        assert!(folds
            .iter()
            .all(|f| f.train.len() == 5 && f.test.len() == 5));
        assert!(matches!(
            inverse_kfold_splits(9, SplitSpec::new(5).unwrap(), 0),
            Err(EvalError::TooFewExamples(9))
        ));
    }

    #[test]
    fn every_example_rotates() {
        let spec = SplitSpec::new(3).unwrap();
        let folds = inverse_kfold_splits(23, spec, 5).unwrap();
        let mut train = [0; 23];
        let mut test = [0; 23];
        for f in &folds {
            f.train.iter().for_each(|&i| train[i] += 1);
            f.test.iter().for_each(|&i| test[i] += 1);
        }
        let kept: Vec<usize> = (0..23).filter(|&i| train[i] + test[i] > 0).collect();
        assert_eq!(kept.len(), 20);
        for i in kept {
            assert_eq!((train[i], test[i]), (3, 7));
        }
    }

    #[test]
    fn f1_cases() {
        let gold: BTreeMap<usize, String> = (0..4).map(|i| (i, format!("s{i}"))).collect();
        let all: BTreeMap<usize, Option<String>> =
            gold.iter().map(|(k, v)| (*k, Some(v.clone()))).collect();
        assert_eq!(f1_score(&all, &gold).unwrap(), 1.0);
        let none: BTreeMap<usize, Option<String>> =
            gold.keys().map(|k| (*k, Some("x".into()))).collect();
        assert_eq!(f1_score(&none, &gold).unwrap(), 0.0);
        let mut three = all.clone();
        three.insert(3, Some("x".into()));
        assert_eq!(f1_score(&three, &gold).unwrap(), 0.75);
        let mut abstain = all.clone();
        abstain.insert(3, None);
        assert!((f1_score(&abstain, &gold).unwrap() - 2.0 * 0.75 / 1.75).abs() < 1e-15);
        abstain.remove(&3);
        assert!(f1_score(&abstain, &gold).is_err());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(stable_hash(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(stable_hash("a"), 0xaf63_dc4c_8601_ec8c);
    }
}
