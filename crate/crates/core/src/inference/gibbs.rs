use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::InferenceError;
use crate::grounding::GroundMrf;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct GibbsOptions {
    /// Recorded sweeps per chain; one sample is one full sweep.
    pub samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Independent chains, seeded `seed, seed + 1, ...`, averaged.
    pub chains: usize,
    pub restarts: usize,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        GibbsOptions {
            samples: 50_000,
            burn_in: 5_000,
            seed: 0,
            chains: 1,
            restarts: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gibbs<T> {
    pub marginals: Vec<T>,
    /// Highest-scoring state visited.
    pub best: Vec<bool>,
    pub best_score: T,
}

struct Chain<'a, T> {
    g: &'a GroundMrf<T>,
    theta: &'a [Vec<T>],
}

impl<T: Real> Chain<'_, T> {
    /// Score change from setting `v` to true versus false, holding the rest.
    fn delta(&self, x: &mut [bool], v: usize) -> T {
        let old = x[v];
        let mut on = T::zero();
        let mut off = T::zero();
        for &f in self.g.var_factors(v) {
            let factor = &self.g.factors()[f];
            x[v] = true;
            on = on + self.theta[f][factor.index_of(x)];
            x[v] = false;
            off = off + self.theta[f][factor.index_of(x)];
        }
        x[v] = old;
        on - off
    }

    fn run(
        &self,
        opts: &GibbsOptions,
        seed: u64,
    ) -> Result<(Vec<u64>, Vec<bool>, T), InferenceError> {
        let n = self.g.num_free();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = self.g.soft_weights();
        let mut x: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let mut tries = 0;
        while !self.g.satisfies_hard(&x) {
            tries += 1;
            if tries > opts.restarts {
                return Err(InferenceError::NoValidState(opts.restarts));
            }
            x.iter_mut().for_each(|b| *b = rng.gen());
        }
        let mut score = self.g.score_with(&weights, &x);
        let mut best = x.clone();
        let mut best_score = score;
        let mut counts = vec![0u64; n];
        for sweep in 0..opts.burn_in + opts.samples {
            for v in 0..n {
                let d = self.delta(&mut x, v);
                let u: f64 = rng.gen();
                let new = T::from_f64_lossy(u) < d.sigmoid();
                if new != x[v] {
                    x[v] = new;
                    score = if new { score + d } else { score - d };
                    if score > best_score {
                        best_score = score;
                        best.clone_from(&x);
                    }
                }
            }
            if sweep >= opts.burn_in {
                for (c, &b) in counts.iter_mut().zip(&x) {
                    *c += b as u64;
                }
            }
        }
        Ok((counts, best, best_score))
    }
}

/// Single-site Gibbs sampling. Hard formulas enter as `-inf` potentials, so
/// a violating value is never drawn once the chain starts in a valid state.
pub fn gibbs<T: Real>(
    g: &GroundMrf<T>,
    weights: &[T],
    opts: &GibbsOptions,
) -> Result<Gibbs<T>, InferenceError> {
    if g.num_free() == 0 {
        return Err(InferenceError::NoFreeAtoms);
    }
    let theta = g.potentials(weights);
    let chain = Chain { g, theta: &theta };
    let chains = opts.chains.max(1);
    let runs: Vec<_> = (0..chains as u64)
        .into_par_iter()
        .map(|i| chain.run(opts, opts.seed.wrapping_add(i)))
        .collect::<Result<_, _>>()?;
    let total = T::from_usize(opts.samples.max(1) * chains).unwrap();
    let mut marginals = vec![T::zero(); g.num_free()];
    for (counts, _, _) in &runs {
        for (m, &c) in marginals.iter_mut().zip(counts) {
            *m = *m + T::from_u64(c).unwrap();
        }
    }
    marginals.iter_mut().for_each(|m| *m = *m / total);
    let (_, best, best_score) = runs
        .into_iter()
        .reduce(|a, b| if b.2 > a.2 { b } else { a })
        .expect("at least one chain");
    Ok(Gibbs {
        marginals,
        best,
        best_score,
    })
}
