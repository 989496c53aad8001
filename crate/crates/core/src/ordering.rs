//! Orbital ordering by exchange-weighted distance, optimized with a genetic algorithm.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fermion::validate_permutation;
use crate::rng::Rng;

/// A permutation of orbitals (`perm[k]` is the orbital at position `k`) with its cost.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitalOrdering {
    pub perm: Vec<usize>,
    pub cost: f64,
}

/// `C = Σ_{i<j} 2 K_ij (pos_i - pos_j)^2` for a row-major symmetric `k`.
pub fn ordering_cost(k: &[f64], perm: &[usize]) -> Result<f64> {
    let n = perm.len();
    if k.len() != n * n {
        return Err(Error::Shape(alloc::format!(
            "exchange matrix has {} entries for {} orbitals",
            k.len(),
            n
        )));
    }
    validate_permutation(perm, n)?;
    Ok(cost_unchecked(k, perm))
}

fn cost_unchecked(k: &[f64], perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut pos = vec![0usize; n];
    for (p, &orb) in perm.iter().enumerate() {
        pos[orb] = p;
    }
    let mut c = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = pos[i] as f64 - pos[j] as f64;
            c += 2.0 * k[i * n + j] * d * d;
        }
    }
    c
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    /// Per-position swap probability inside a mutation; `None` uses `1/n`.
    pub shuffle_prob: Option<f64>,
    pub generations: usize,
    pub tournament: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            crossover_prob: 0.7,
            mutation_prob: 0.2,
            shuffle_prob: None,
            generations: 100,
            tournament: 3,
        }
    }
}

/// Result of a GA run: the best ordering and the best cost after each generation.
#[derive(Clone, Debug, PartialEq)]
pub struct GaResult {
    pub best: OrbitalOrdering,
    pub initial_cost: f64,
    pub history: Vec<f64>,
}

/// Ordered crossover: keeps `a[lo..=hi]` in place and fills the rest in the
/// order the remaining genes appear in `b`, starting after `hi`.
pub fn ordered_crossover(a: &[usize], b: &[usize], lo: usize, hi: usize) -> Vec<usize> {
    let n = a.len();
    let mut child = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for i in lo..=hi {
        child[i] = a[i];
        used[a[i]] = true;
    }
    let mut write = (hi + 1) % n;
    for step in 0..n {
        let gene = b[(hi + 1 + step) % n];
        if used[gene] {
            continue;
        }
        child[write] = gene;
        used[gene] = true;
        write = (write + 1) % n;
    }
    child
}

/// Swaps each position with a random other one with probability `p`.
pub fn shuffle_indexes(perm: &mut [usize], p: f64, rng: &mut Rng) {
    let n = perm.len();
    if n < 2 {
        return;
    }
    for i in 0..n {
        if rng.bernoulli(p) {
            let mut j = rng.below(n - 1);
            if j >= i {
                j += 1;
            }
            perm.swap(i, j);
        }
    }
}

/// Elitist generational GA with tournament selection, ordered crossover and
/// index-shuffling mutation. The identity ordering seeds the population.
pub fn ga_reorder(k: &[f64], n: usize, cfg: &GaConfig, seed: u64) -> Result<GaResult> {
    if n < 2 {
        return Err(Error::InvalidArgument("at least two orbitals are required".into()));
    }
    if k.len() != n * n {
        return Err(Error::Shape(alloc::format!("exchange matrix has {} entries for {} orbitals", k.len(), n)));
    }
    if cfg.population < 2 || cfg.tournament < 1 {
        return Err(Error::InvalidArgument("population must be at least 2".into()));
    }
    let mut rng = Rng::new(seed);
    let indpb = cfg.shuffle_prob.unwrap_or(1.0 / n as f64);
    let identity: Vec<usize> = (0..n).collect();
    let initial_cost = cost_unchecked(k, &identity);

    let mut pop: Vec<Vec<usize>> = Vec::with_capacity(cfg.population);
    pop.push(identity);
    while pop.len() < cfg.population {
        let mut p: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut p);
        pop.push(p);
    }
    let mut fit: Vec<f64> = pop.iter().map(|p| cost_unchecked(k, p)).collect();
    let mut best = argmin(&fit);
    let mut best_ord = OrbitalOrdering {
        perm: pop[best].clone(),
        cost: fit[best],
    };
    let mut history = Vec::with_capacity(cfg.generations);

    for _ in 0..cfg.generations {
        let mut next: Vec<Vec<usize>> = Vec::with_capacity(cfg.population);
        next.push(pop[best].clone());
        let mut offspring: Vec<Vec<usize>> = (1..cfg.population)
            .map(|_| {
                let mut w = rng.below(pop.len());
                for _ in 1..cfg.tournament {
                    let c = rng.below(pop.len());
                    if fit[c] < fit[w] {
                        w = c;
                    }
                }
                pop[w].clone()
            })
            .collect();
        let mut i = 0;
        while i + 1 < offspring.len() {
            if rng.bernoulli(cfg.crossover_prob) {
                let mut lo = rng.below(n);
                let mut hi = rng.below(n);
                if lo > hi {
                    core::mem::swap(&mut lo, &mut hi);
                }
                let c1 = ordered_crossover(&offspring[i], &offspring[i + 1], lo, hi);
                let c2 = ordered_crossover(&offspring[i + 1], &offspring[i], lo, hi);
                offspring[i] = c1;
                offspring[i + 1] = c2;
            }
            i += 2;
        }
        for child in offspring.iter_mut() {
            if rng.bernoulli(cfg.mutation_prob) {
                shuffle_indexes(child, indpb, &mut rng);
            }
        }
        next.extend(offspring);
        // duplicates are replaced by mutated copies to keep the population diverse
        for i in 1..next.len() {
            let mut tries = 0;
            while tries < 8 && next[..i].contains(&next[i]) {
                let mut c = next[i].clone();
                shuffle_indexes(&mut c, indpb.max(1.0 / n as f64), &mut rng);
                next[i] = c;
                tries += 1;
            }
        }
        pop = next;
        fit = pop.iter().map(|p| cost_unchecked(k, p)).collect();
        best = argmin(&fit);
        if fit[best] < best_ord.cost {
            best_ord = OrbitalOrdering {
                perm: pop[best].clone(),
                cost: fit[best],
            };
        }
        history.push(best_ord.cost);
    }
    Ok(GaResult {
        best: best_ord,
        initial_cost,
        history,
    })
}

fn argmin(v: &[f64]) -> usize {
    let mut b = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[b] {
            b = i;
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_exchange_costs_nothing() {
        assert_eq!(ordering_cost(&[0.0; 9], &[2, 0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn two_orbitals() {
        let k = [0.0, 0.4, 0.4, 0.0];
        assert!((ordering_cost(&k, &[0, 1]).unwrap() - 0.8).abs() < 1e-15);
        assert!((ordering_cost(&k, &[1, 0]).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn three_orbitals_hand_values() {
        let mut k = [0.0; 9];
        k[1] = 1.0;
        k[3] = 1.0;
        assert_eq!(ordering_cost(&k, &[0, 1, 2]).unwrap(), 2.0);
        assert_eq!(ordering_cost(&k, &[0, 2, 1]).unwrap(), 8.0);
    }

    #[test]
    fn crossover_yields_permutations() {
        let a = [0, 1, 2, 3, 4, 5, 6];
        let b = [6, 4, 2, 0, 5, 3, 1];
        let c = ordered_crossover(&a, &b, 2, 4);
        assert_eq!(&c[2..=4], &[2, 3, 4]);
        assert!(validate_permutation(&c, 7).is_ok());
        assert_eq!(c, alloc::vec![0, 5, 2, 3, 4, 1, 6]);
    }

    #[test]
    fn band_matrix_keeps_identity_class() {
        let n = 6;
        let mut k = vec![0.0; n * n];
        for i in 0..n - 1 {
            k[i * n + i + 1] = 1.0;
            k[(i + 1) * n + i] = 1.0;
        }
        let r = ga_reorder(&k, n, &GaConfig::default(), 3).unwrap();
        let id: Vec<usize> = (0..n).collect();
        let rev: Vec<usize> = (0..n).rev().collect();
        assert!(r.best.perm == id || r.best.perm == rev, "{:?}", r.best.perm);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }
}
