use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{f1_from_counts, inverse_kfold_splits, stable_hash, EvalError, SplitSpec, WsdExample};
use crate::grounding::{Compiled, GroundingOptions, Mode};
use crate::inference::{exact, sense_posterior};
use crate::learning::{optimize, Objective, Status, TrainConfig};
use crate::model::Mln;
use crate::taxonomy::Taxonomy;

/// How a sense is chosen for each test word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Prediction {
    /// Most probable candidate under the marginal sense posterior.
    #[default]
    Marginal,
    /// Candidate true in the joint MAP state (smallest id if several;
    /// abstain if none).
    Map,
}

/// Training iteration limit used by the sweep unless overridden.
pub const EVAL_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub splits: Vec<SplitSpec>,
    pub modes: Vec<Mode>,
    pub seed: u64,
    pub train: TrainConfig<f64>,
    pub prediction: Prediction,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            splits: SplitSpec::all(),
            modes: vec![Mode::Fol, Mode::Fuzzy],
            seed: 0,
            train: TrainConfig {
                max_iterations: EVAL_MAX_ITERATIONS,
                ..TrainConfig::default()
            },
            prediction: Prediction::Marginal,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldOutcome {
    pub verb: String,
    pub mode: Mode,
    pub split: String,
    pub fold: usize,
    pub train_examples: usize,
    pub test_words: usize,
    pub predicted: usize,
    pub correct: usize,
    pub f1: f64,
    pub formulas: usize,
    pub iterations: usize,
    pub status: Status,
}

/// Mean F1 over the folds of one verb, mode and split.
#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub verb: String,
    pub mode: Mode,
    pub split: SplitSpec,
    pub mean_f1: f64,
}

impl Serialize for SplitSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub verbs: Vec<String>,
    pub modes: Vec<Mode>,
    pub splits: Vec<SplitSpec>,
    pub cells: Vec<Cell>,
    pub folds: Vec<FoldOutcome>,
}

impl ExperimentResult {
    pub fn cell(&self, verb: &str, mode: Mode, split: SplitSpec) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.verb == verb && c.mode == mode && c.split == split)
            .map(|c| c.mean_f1)
    }

    /// Mean over verbs of the per-verb mean F1.
    pub fn mean(&self, mode: Mode, split: SplitSpec) -> f64 {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.mode == mode && c.split == split)
            .map(|c| c.mean_f1)
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }

    /// Rows `verb × mode` (plus an `all` row per mode), one column per split.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("verb\tmode");
        for s in &self.splits {
            write!(out, "\t{s}").unwrap();
        }
        out.push('\n');
        let rows = self
            .verbs
            .iter()
            .map(String::as_str)
            .chain(std::iter::once("all"));
        for verb in rows {
            for &mode in &self.modes {
                write!(out, "{verb}\t{mode}").unwrap();
                for &s in &self.splits {
                    let v = if verb == "all" {
                        self.mean(mode, s)
                    } else {
                        self.cell(verb, mode, s).unwrap_or(f64::NAN)
                    };
                    write!(out, "\t{v:.4}").unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    /// One line per fold.
    pub fn detail_tsv(&self) -> String {
        let mut out = String::from(
            "verb\tmode\tsplit\tfold\ttrain_examples\ttest_words\tpredicted\tcorrect\tf1\tformulas\titerations\tstatus\n",
        );
        for f in &self.folds {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\t{}\t{:?}",
                f.verb,
                f.mode,
                f.split,
                f.fold,
                f.train_examples,
                f.test_words,
                f.predicted,
                f.correct,
                f.f1,
                f.formulas,
                f.iterations,
                f.status
            )
            .unwrap();
        }
        out
    }
}

struct Job<'a> {
    verb: &'a str,
    examples: &'a [&'a WsdExample],
    split: SplitSpec,
    fold: usize,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn pick_sense(posterior: &[(String, f64)]) -> Option<String> {
    let best = posterior
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    posterior
        .iter()
        .filter(|p| p.1 >= best - 1e-12)
        .map(|p| p.0.clone())
        .min()
}

fn run_job(
    job: &Job<'_>,
    t: &Taxonomy,
    template: &Mln<f64>,
    cfg: &ExperimentConfig,
) -> Result<Vec<FoldOutcome>, EvalError> {
    let opts = GroundingOptions::new(Mode::Fuzzy).closed(["has_pos", "instance_of"]);
    let train_dbs = job
        .train
        .iter()
        .map(|&i| job.examples[i].training_db(template))
        .collect::<Result<Vec<_>, _>>()?;
    let m = template.collect_domains(&train_dbs)?.expand_templates()?;
    // Both modes share the expanded model, so it is compiled once.
    let compiled = Compiled::new(&m, &opts)?;
    let test_dbs = job
        .test
        .iter()
        .map(|&i| job.examples[i].test_db(&m))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(cfg.modes.len());
    for &mode in &cfg.modes {
        let mode_opts = GroundingOptions {
            mode,
            ..opts.clone()
        };
        let obj = Objective::from_compiled(
            &compiled,
            &train_dbs,
            t,
            &mode_opts,
            cfg.train.sigma2,
            cfg.train.cap,
        )?;
        let result = optimize(&obj, None, &cfg.train)?;
        let test_opts = GroundingOptions {
            discard_formulas: true,
            ..mode_opts
        };
        let mut test_words = 0;
        let mut made = 0;
        let mut correct = 0;
        for (&i, db) in job.test.iter().zip(&test_dbs) {
            let e = job.examples[i];
            let g = compiled.ground_with(db, t, &test_opts)?;
            let inf = exact(&g, &result.weights, cfg.train.cap)?;
            for (wi, w) in e.tokens.iter().enumerate() {
                let word = WsdExample::word_constant(wi);
                let guess = match cfg.prediction {
                    Prediction::Marginal => {
                        pick_sense(&sense_posterior(&g, &inf.marginals, "instance_of", &word)?)
                    }
                    Prediction::Map => w
                        .candidates
                        .iter()
                        .filter(|c| {
                            let atom =
                                crate::logic::Atom::ground("instance_of", &[&word, c.as_str()]);
                            g.free_index(&atom).is_some_and(|v| inf.map[v])
                        })
                        .min()
                        .cloned(),
                };
                test_words += 1;
                if let Some(s) = guess {
                    made += 1;
                    if s == w.gold {
                        correct += 1;
                    }
                }
            }
        }
        out.push(FoldOutcome {
            verb: job.verb.to_string(),
            mode,
            split: job.split.to_string(),
            fold: job.fold,
            train_examples: job.train.len(),
            test_words,
            predicted: made,
            correct,
            f1: f1_from_counts(correct, made, test_words),
            formulas: m.formulas.len(),
            iterations: result.trace.len() - 1,
            status: result.status,
        });
    }
    Ok(out)
}

/// Inverse k-fold cross-validation per verb, split and mode.
///
/// For each fold the template is expanded over the training fold's domains,
/// its weights are fitted to the training examples, and every test word is
/// labelled with its most probable candidate sense. A fold's F1 pools all
/// its test words; a cell is the mean over the ten folds. The shuffle for a
/// verb is seeded with `seed + hash(verb)`, so every mode and split of a
/// verb sees the same blocks.
pub fn run_experiment(
    corpus: &[WsdExample],
    t: &Taxonomy,
    template: &Mln<f64>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult, EvalError> {
    let mut by_verb: BTreeMap<&str, Vec<&WsdExample>> = BTreeMap::new();
    for e in corpus {
        e.validate(t).map_err(EvalError::Generator)?;
        by_verb.entry(e.verb.as_str()).or_default().push(e);
    }
    let mut jobs = Vec::new();
    for (verb, examples) in &by_verb {
        let seed = cfg.seed.wrapping_add(stable_hash(verb));
        for &split in &cfg.splits {
            for (fold, f) in inverse_kfold_splits(examples.len(), split, seed)?
                .into_iter()
                .enumerate()
            {
                jobs.push(Job {
                    verb,
                    examples,
                    split,
                    fold,
                    train: f.train,
                    test: f.test,
                });
            }
        }
    }
    let folds: Vec<FoldOutcome> = jobs
        .par_iter()
        .map(|j| {
            let r = run_job(j, t, template, cfg);
            for f in r.iter().flatten() {
                log::info!(
                    "{} {} {} fold {}: f1 {:.4}",
                    f.verb,
                    f.mode,
                    f.split,
                    f.fold,
                    f.f1
                );
            }
            r
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut cells = Vec::new();
    for verb in by_verb.keys() {
        for &mode in &cfg.modes {
            for &split in &cfg.splits {
                let label = split.to_string();
                let f1s: Vec<f64> = folds
                    .iter()
                    .filter(|f| f.verb == *verb && f.mode == mode && f.split == label)
                    .map(|f| f.f1)
                    .collect();
                cells.push(Cell {
                    verb: verb.to_string(),
                    mode,
                    split,
                    mean_f1: f1s.iter().sum::<f64>() / f1s.len() as f64,
                });
            }
        }
    }
    Ok(ExperimentResult {
        verbs: by_verb.keys().map(|v| v.to_string()).collect(),
        modes: cfg.modes.clone(),
        splits: cfg.splits.clone(),
        cells,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_break_prefers_smallest_id() {
        let post = vec![
            ("b".to_string(), 0.5),
            ("a".to_string(), 0.5 - 1e-14),
            ("c".to_string(), 0.0),
        ];
        assert_eq!(pick_sense(&post).as_deref(), Some("a"));
        let post = vec![("b".to_string(), 0.6), ("a".to_string(), 0.4)];
        assert_eq!(pick_sense(&post).as_deref(), Some("b"));
    }
}
