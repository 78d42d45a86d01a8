//! Maximum-likelihood weight learning with exact expectations.
//!
//! Each database is one fully observed training world. The objective is
//! `Σ_db [score(x_db) − ln Z_db] − Σ_j w_j² / (2σ²)`, which is concave in the
//! weights, maximized by gradient ascent with a backtracking line search.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::evidence::Database;
use crate::grounding::{
    Compiled, GroundMrf, GroundingError, GroundingOptions, Purpose, SimilaritySource,
};
use crate::inference::{exact_with, InferenceError, Layout, DEFAULT_CAP};
use crate::model::{Mln, Weight};
use crate::scalar::{pairwise_sum, Real};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LearningError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training database {db} violates hard formula {formula}")]
    Unobservable { db: usize, formula: usize },
    #[error("log-likelihood became non-finite at iteration {0}")]
    Divergence(usize),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone)]
pub struct TrainConfig<T> {
    /// Trial step of iteration `t` is `rate / (1 + decay · t)`.
    pub rate: T,
    pub decay: T,
    pub max_iterations: usize,
    /// Stop once the gradient's ∞-norm is at most this.
    pub tolerance: T,
    /// Gaussian prior variance σ².
    pub sigma2: T,
    pub cap: usize,
    pub armijo: T,
    pub max_backtracks: usize,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        TrainConfig {
            rate: T::one(),
            decay: T::zero(),
            max_iterations: 500,
            tolerance: T::from_f64_lossy(1e-5),
            sigma2: T::from_f64_lossy(100.0),
            cap: DEFAULT_CAP,
            armijo: T::from_f64_lossy(1e-4),
            max_backtracks: 60,
        }
    }
}

impl<T: Real> TrainConfig<T> {
    pub fn validate(&self) -> Result<(), LearningError> {
        if !(self.rate > T::zero()) {
            return Err(LearningError::Config("rate must be positive".into()));
        }
        if !(self.decay >= T::zero()) {
            return Err(LearningError::Config("decay must be non-negative".into()));
        }
        if !(self.sigma2 > T::zero()) {
            return Err(LearningError::Config("sigma2 must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(LearningError::Config(
                "at least one iteration is required".into(),
            ));
        }
        Ok(())
    }
}

/// The training objective over a fixed set of grounded databases.
#[derive(Debug, Clone)]
pub struct Objective<T> {
    mrfs: Vec<GroundMrf<T>>,
    layouts: Vec<Layout>,
    observed: Vec<Vec<T>>,
    learnable: Vec<bool>,
    sigma2: T,
}

impl<T: Real> Objective<T> {
    /// Grounds every database for training. `opts.purpose` is forced to
    /// [`Purpose::Training`].
    pub fn new(
        m: &Mln<T>,
        dbs: &[Database],
        sims: &dyn SimilaritySource<T>,
        opts: &GroundingOptions,
        sigma2: T,
        cap: usize,
    ) -> Result<Self, LearningError> {
        Self::from_compiled(&Compiled::new(m, opts)?, dbs, sims, opts, sigma2, cap)
    }

    /// As [`Objective::new`] for a model already compiled with the same
    /// closed predicates.
    pub fn from_compiled(
        compiled: &Compiled<'_, T>,
        dbs: &[Database],
        sims: &dyn SimilaritySource<T>,
        opts: &GroundingOptions,
        sigma2: T,
        cap: usize,
    ) -> Result<Self, LearningError> {
        let m = compiled.model();
        let opts = GroundingOptions {
            purpose: Purpose::Training,
            discard_formulas: true,
            ..opts.clone()
        };
        let mrfs: Vec<GroundMrf<T>> = dbs
            .par_iter()
            .map(|db| compiled.ground_with(db, sims, &opts))
            .collect::<Result<_, _>>()?;
        let mut observed = Vec::with_capacity(mrfs.len());
        for (i, g) in mrfs.iter().enumerate() {
            if !g.satisfies_hard(g.observed()) {
                let formula = m
                    .formulas
                    .iter()
                    .position(|f| f.weight.is_hard())
                    .unwrap_or(0);
                return Err(LearningError::Unobservable { db: i, formula });
            }
            observed.push(g.feature_counts(g.observed()));
        }
        let layouts = mrfs
            .par_iter()
            .map(|g| Layout::new(g, cap))
            .collect::<Result<_, _>>()?;
        Ok(Objective {
            mrfs,
            layouts,
            observed,
            learnable: m.formulas.iter().map(|f| !f.weight.is_hard()).collect(),
            sigma2,
        })
    }

    pub fn num_weights(&self) -> usize {
        self.learnable.len()
    }

    pub fn mrfs(&self) -> &[GroundMrf<T>] {
        &self.mrfs
    }

    /// Summed fuzzy value of each formula in each training world.
    pub fn observed_counts(&self) -> &[Vec<T>] {
        &self.observed
    }

    fn check(&self, w: &[T]) -> Result<(), LearningError> {
        if w.len() != self.learnable.len() {
            return Err(LearningError::WeightCount {
                expected: self.learnable.len(),
                got: w.len(),
            });
        }
        Ok(())
    }

    fn prior(&self, w: &[T]) -> T {
        let two = T::one() + T::one();
        let terms: Vec<T> = w
            .iter()
            .zip(&self.learnable)
            .filter(|(_, &l)| l)
            .map(|(&x, _)| x * x / (two * self.sigma2))
            .collect();
        pairwise_sum(&terms)
    }

    /// Log-likelihood and its gradient at `w`.
    pub fn evaluate(&self, w: &[T]) -> Result<(T, Vec<T>), LearningError> {
        self.check(w)?;
        let per_db: Vec<(T, Vec<T>)> = self
            .mrfs
            .par_iter()
            .zip(&self.layouts)
            .zip(&self.observed)
            .map(|((g, layout), obs)| -> Result<(T, Vec<T>), LearningError> {
                let e = exact_with(g, layout, w)?;
                let score =
                    pairwise_sum(&obs.iter().zip(w).map(|(&n, &x)| n * x).collect::<Vec<_>>());
                let expected = e.expected_counts(g);
                let grad = obs.iter().zip(&expected).map(|(&o, &x)| o - x).collect();
                Ok((score - e.log_z, grad))
            })
            .collect::<Result<_, _>>()?;
        let ll = pairwise_sum(&per_db.iter().map(|p| p.0).collect::<Vec<_>>()) - self.prior(w);
        let grad = (0..w.len())
            .map(|j| {
                if !self.learnable[j] {
                    return T::zero();
                }
                let terms: Vec<T> = per_db.iter().map(|p| p.1[j]).collect();
                pairwise_sum(&terms) - w[j] / self.sigma2
            })
            .collect();
        Ok((ll, grad))
    }

    pub fn log_likelihood(&self, w: &[T]) -> Result<T, LearningError> {
        Ok(self.evaluate(w)?.0)
    }

    pub fn gradient(&self, w: &[T]) -> Result<Vec<T>, LearningError> {
        Ok(self.evaluate(w)?.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    /// The line search could not improve the objective any further.
    Stalled,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow<T> {
    pub iteration: usize,
    pub log_likelihood: T,
    pub grad_norm: T,
    pub step: T,
}

#[derive(Debug, Clone)]
pub struct TrainResult<T> {
    pub weights: Vec<T>,
    pub trace: Vec<TraceRow<T>>,
    pub status: Status,
}

impl<T: Real> TrainResult<T> {
    pub fn log_likelihood(&self) -> T {
        self.trace
            .last()
            .map(|r| r.log_likelihood)
            .unwrap_or_else(T::nan)
    }

    /// Training log: `iteration  ll  grad_norm  step`, tab separated.
    pub fn trace_tsv(&self) -> String {
        let mut out = String::from("iteration\tll\tgrad_norm\tstep\n");
        for r in &self.trace {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.iteration, r.log_likelihood, r.grad_norm, r.step
            ));
        }
        out
    }
}

fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Gradient ascent from `init` (zeros when `None`). A step is only accepted
/// if it satisfies the Armijo condition, so the log-likelihood trace never
/// decreases.
pub fn optimize<T: Real>(
    obj: &Objective<T>,
    init: Option<&[T]>,
    cfg: &TrainConfig<T>,
) -> Result<TrainResult<T>, LearningError> {
    cfg.validate()?;
    let mut w: Vec<T> = match init {
        Some(w) => w.to_vec(),
        None => vec![T::zero(); obj.num_weights()],
    };
    for (x, &l) in w.iter_mut().zip(&obj.learnable) {
        if !l {
            *x = T::zero();
        }
    }
    let (mut ll, mut grad) = obj.evaluate(&w)?;
    if !ll.is_finite() {
        return Err(LearningError::Divergence(0));
    }
    let mut trace = vec![TraceRow {
        iteration: 0,
        log_likelihood: ll,
        grad_norm: inf_norm(&grad),
        step: T::zero(),
    }];
    let mut status = Status::MaxIterations;
    let mut last_step: Option<T> = None;
    for it in 1..=cfg.max_iterations {
        let norm = inf_norm(&grad);
        if norm <= cfg.tolerance {
            status = Status::Converged;
            break;
        }
        let sq = pairwise_sum(&grad.iter().map(|&g| g * g).collect::<Vec<_>>());
        let mut step = cfg.rate / (T::one() + cfg.decay * T::from_usize(it - 1).unwrap());
        if let Some(last) = last_step {
            step = step.min(last + last);
        }
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial: Vec<T> = w.iter().zip(&grad).map(|(&x, &g)| x + step * g).collect();
            let (tll, tgrad) = obj.evaluate(&trial)?;
            if tll.is_finite() && tll >= ll + cfg.armijo * step * sq {
                accepted = Some((trial, tll, tgrad));
                break;
            }
            step = step / (T::one() + T::one());
        }
        let Some((nw, nll, ngrad)) = accepted else {
            log::debug!("line search exhausted at iteration {it}");
            status = Status::Stalled;
            break;
        };
        w = nw;
        ll = nll;
        grad = ngrad;
        last_step = Some(step);
        trace.push(TraceRow {
            iteration: it,
            log_likelihood: ll,
            grad_norm: inf_norm(&grad),
            step,
        });
        log::trace!("iteration {it}: ll {ll} |g| {}", inf_norm(&grad));
    }
    if status == Status::MaxIterations && inf_norm(&grad) <= cfg.tolerance {
        status = Status::Converged;
    }
    Ok(TrainResult {
        weights: w,
        trace,
        status,
    })
}

/// Fits the soft weights of an expanded MLN to the training databases and
/// returns the model with the fitted weights.
pub fn train<T: Real>(
    m: &Mln<T>,
    dbs: &[Database],
    sims: &dyn SimilaritySource<T>,
    opts: &GroundingOptions,
    cfg: &TrainConfig<T>,
) -> Result<(Mln<T>, TrainResult<T>), LearningError> {
    cfg.validate()?;
    let obj = Objective::new(m, dbs, sims, opts, cfg.sigma2, cfg.cap)?;
    let result = optimize(&obj, None, cfg)?;
    Ok((m.with_weights(&result.weights), result))
}

/// Weights of `m` as a vector, with zeros for hard formulas.
pub fn weight_vector<T: Real>(m: &Mln<T>) -> Vec<T> {
    m.formulas
        .iter()
        .map(|f| match f.weight {
            Weight::Soft(w) => w,
            Weight::Hard => T::zero(),
        })
        .collect()
}
