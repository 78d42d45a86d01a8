use rayon::prelude::*;

use super::InferenceError;
use crate::grounding::GroundMrf;
use crate::scalar::{pairwise_sum, Real};

/// Default largest component enumerated exactly.
pub const DEFAULT_CAP: usize = 24;

const CHUNK_BITS: usize = 16;

/// Exact inference by enumerating every world of each connected component.
#[derive(Debug, Clone)]
pub struct Exact<T> {
    pub log_z: T,
    /// `P(x_v = 1)` per free atom.
    pub marginals: Vec<T>,
    /// Distribution of each factor's assignment.
    pub factor_marginals: Vec<Vec<T>>,
    pub map: Vec<bool>,
    pub map_score: T,
}

impl<T: Real> Exact<T> {
    /// `E[n_p]`: expected summed fuzzy value of each formula's groundings.
    pub fn expected_counts(&self, g: &GroundMrf<T>) -> Vec<T> {
        let mut n = g.constant_features().to_vec();
        for (f, pm) in g.factors().iter().zip(&self.factor_marginals) {
            for e in &f.entries {
                n[e.formula] = n[e.formula] + pm[e.index] * e.value;
            }
        }
        n
    }
}

/// Components with at most this many variables get precomputed
/// per-world factor indices.
const TABLE_BITS: usize = 12;

#[derive(Debug, Clone)]
struct Component {
    vars: Vec<usize>,
    factors: Vec<usize>,
    /// Per factor, the world-index bit of each factor variable.
    bits: Vec<Vec<u32>>,
    /// Per factor, its local assignment in every world.
    table: Option<Vec<Vec<u16>>>,
}

impl Component {
    #[inline]
    fn local(&self, k: usize, world: u64) -> usize {
        self.bits[k]
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | ((((world >> b) & 1) as usize) << i))
    }
}

/// The weight-independent part of exact inference on one network:
/// components, their factors and index tables. Reusable across weights.
#[derive(Debug, Clone)]
pub struct Layout {
    components: Vec<Component>,
}

impl Layout {
    pub fn new<T: Real>(g: &GroundMrf<T>, cap: usize) -> Result<Self, InferenceError> {
        if let Some(big) = g.components().iter().find(|c| c.len() > cap.min(62)) {
            return Err(InferenceError::CapExceeded {
                size: big.len(),
                cap,
            });
        }
        let factors = g.factors();
        let components = g
            .components()
            .iter()
            .map(|vars| {
                let k = vars.len();
                let mut fs: Vec<usize> = vars
                    .iter()
                    .flat_map(|&v| g.var_factors(v).iter().copied())
                    .collect();
                fs.sort_unstable();
                fs.dedup();
                let bits = fs
                    .iter()
                    .map(|&f| {
                        factors[f]
                            .vars
                            .iter()
                            .map(|v| {
                                (k - 1 - vars.binary_search(v).expect("factor inside component"))
                                    as u32
                            })
                            .collect()
                    })
                    .collect();
                let mut comp = Component {
                    vars: vars.clone(),
                    factors: fs,
                    bits,
                    table: None,
                };
                if k <= TABLE_BITS {
                    let table = (0..comp.factors.len())
                        .map(|fi| (0..1u64 << k).map(|w| comp.local(fi, w) as u16).collect())
                        .collect();
                    comp.table = Some(table);
                }
                comp
            })
            .collect();
        Ok(Layout { components })
    }
}

#[derive(Clone)]
struct Partial<T> {
    max: T,
    sum: T,
    var_sums: Vec<T>,
    factor_sums: Vec<Vec<T>>,
    best_score: T,
    best: u64,
}

impl<T: Real> Partial<T> {
    fn combine(self, other: Self) -> Self {
        if other.max == T::neg_infinity() {
            return self;
        }
        if self.max == T::neg_infinity() {
            return other;
        }
        let m = self.max.max(other.max);
        let (sa, sb) = ((self.max - m).exp(), (other.max - m).exp());
        let mix = |a: &[T], b: &[T]| -> Vec<T> {
            a.iter().zip(b).map(|(&x, &y)| x * sa + y * sb).collect()
        };
        let (best_score, best) = if other.best_score > self.best_score {
            (other.best_score, other.best)
        } else {
            (self.best_score, self.best)
        };
        Partial {
            max: m,
            sum: self.sum * sa + other.sum * sb,
            var_sums: mix(&self.var_sums, &other.var_sums),
            factor_sums: self
                .factor_sums
                .iter()
                .zip(&other.factor_sums)
                .map(|(a, b)| mix(a, b))
                .collect(),
            best_score,
            best,
        }
    }
}

fn tree_reduce<T: Real>(mut parts: Vec<Partial<T>>) -> Partial<T> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.combine(b),
                None => a,
            });
        }
        parts = next;
    }
    parts.pop().expect("at least one chunk")
}

fn enumerate_chunk<T: Real>(c: &Component, theta: &[Vec<T>], start: u64, len: u64) -> Partial<T> {
    let k = c.vars.len();
    let range = start as usize..(start + len) as usize;
    let mut scores = vec![T::zero(); len as usize];
    match &c.table {
        Some(table) => {
            for (&f, tab) in c.factors.iter().zip(table) {
                let th = &theta[f];
                for (s, &a) in scores.iter_mut().zip(&tab[range.clone()]) {
                    *s = *s + th[a as usize];
                }
            }
        }
        None => {
            for (i, s) in scores.iter_mut().enumerate() {
                let w = start + i as u64;
                for (fi, &f) in c.factors.iter().enumerate() {
                    *s = *s + theta[f][c.local(fi, w)];
                }
            }
        }
    }
    let mut best = start;
    let mut best_score = T::neg_infinity();
    for (i, &s) in scores.iter().enumerate() {
        if s > best_score {
            best_score = s;
            best = start + i as u64;
        }
    }
    let mut part = Partial {
        max: best_score,
        sum: T::zero(),
        var_sums: vec![T::zero(); k],
        factor_sums: c
            .factors
            .iter()
            .map(|&f| vec![T::zero(); theta[f].len()])
            .collect(),
        best_score,
        best,
    };
    if best_score == T::neg_infinity() {
        return part;
    }
    let weights: Vec<T> = scores.iter().map(|&s| (s - best_score).exp()).collect();
    part.sum = pairwise_sum(&weights);
    for (j, acc) in part.var_sums.iter_mut().enumerate() {
        let bit = k - 1 - j;
        for (i, &e) in weights.iter().enumerate() {
            if ((start + i as u64) >> bit) & 1 == 1 {
                *acc = *acc + e;
            }
        }
    }
    match &c.table {
        Some(table) => {
            for (acc, tab) in part.factor_sums.iter_mut().zip(table) {
                for (&e, &a) in weights.iter().zip(&tab[range.clone()]) {
                    acc[a as usize] = acc[a as usize] + e;
                }
            }
        }
        None => {
            for (fi, acc) in part.factor_sums.iter_mut().enumerate() {
                for (i, &e) in weights.iter().enumerate() {
                    let a = c.local(fi, start + i as u64);
                    acc[a] = acc[a] + e;
                }
            }
        }
    }
    part
}

/// Enumerates every component of `g` under `weights`.
///
/// The variable listed first in a component is the most significant bit of
/// the world index, so the first maximum found is the lexicographically
/// smallest maximizer. Chunks are combined by a fixed pairwise tree, making
/// the result independent of the thread count.
pub fn exact<T: Real>(
    g: &GroundMrf<T>,
    weights: &[T],
    cap: usize,
) -> Result<Exact<T>, InferenceError> {
    exact_with(g, &Layout::new(g, cap)?, weights)
}

/// [`exact`] with a precomputed layout of `g`.
pub fn exact_with<T: Real>(
    g: &GroundMrf<T>,
    layout: &Layout,
    weights: &[T],
) -> Result<Exact<T>, InferenceError> {
    let theta = g.potentials(weights);
    let results: Vec<(&Component, Partial<T>)> = layout
        .components
        .par_iter()
        .map(|comp| {
            let total = 1u64 << comp.vars.len();
            let chunk = 1u64 << CHUNK_BITS;
            let part = if total <= chunk {
                enumerate_chunk(comp, &theta, 0, total)
            } else {
                let parts: Vec<Partial<T>> = (0..total / chunk)
                    .into_par_iter()
                    .map(|i| enumerate_chunk(comp, &theta, i * chunk, chunk))
                    .collect();
                tree_reduce(parts)
            };
            (comp, part)
        })
        .collect();

    let n = g.num_free();
    let mut marginals = vec![T::zero(); n];
    let mut map = vec![false; n];
    let mut factor_marginals: Vec<Vec<T>> =
        theta.iter().map(|t| vec![T::zero(); t.len()]).collect();
    let mut log_zs = Vec::with_capacity(results.len() + 1);
    let mut map_scores = Vec::with_capacity(results.len() + 1);
    for (comp, part) in &results {
        if part.max == T::neg_infinity() {
            return Err(InferenceError::Unsatisfiable);
        }
        let k = comp.vars.len();
        for (j, &v) in comp.vars.iter().enumerate() {
            marginals[v] = part.var_sums[j] / part.sum;
            map[v] = (part.best >> (k - 1 - j)) & 1 == 1;
        }
        for (i, &f) in comp.factors.iter().enumerate() {
            factor_marginals[f] = part.factor_sums[i].iter().map(|&x| x / part.sum).collect();
        }
        log_zs.push(part.max + part.sum.ln());
        map_scores.push(part.best_score);
    }
    let constant = g.constant_score(weights);
    log_zs.push(constant);
    map_scores.push(constant);
    Ok(Exact {
        log_z: pairwise_sum(&log_zs),
        marginals,
        factor_marginals,
        map,
        map_score: pairwise_sum(&map_scores),
    })
}
