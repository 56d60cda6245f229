//! Random valid trees and independent scalar formulas for property tests.

#![allow(dead_code)]

use argllm_core::{Argument, ArgumentId, NewArgument, Polarity, Provenance, Qbaf, MAX_DEPTH};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Scores biased towards the interval ends so that 0 and 1 show up.
pub fn score(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen::<f64>(),
    }
}

/// A random valid tree: every argument above the depth cap gets 0-4
/// attackers and 0-4 supporters.
pub fn random_tree(rng: &mut impl Rng) -> Qbaf {
    let root = Argument::new(ArgumentId::numbered(0), "claim", score(rng), Provenance::Claim).unwrap();
    let mut q = Qbaf::new(root);
    let mut frontier = vec![ArgumentId::numbered(0)];
    for _ in 0..MAX_DEPTH {
        let mut next = Vec::new();
        for parent in &frontier {
            for polarity in Polarity::BOTH {
                for _ in 0..rng.gen_range(0..=4) {
                    let s = score(rng);
                    let (nq, id) =
                        q.add_argument(parent, polarity, NewArgument::new("evidence", s, Provenance::LlmGenerated)).unwrap();
                    q = nq;
                    next.push(id);
                }
            }
        }
        frontier = next;
    }
    q
}

/// Noisy-or accumulated one value at a time.
pub fn oracle_aggregate(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + v - acc * v)
}

pub fn oracle_combine(tau: f64, va: f64, vs: f64) -> f64 {
    let d = vs - va;
    if d <= 0.0 {
        tau * (1.0 + d)
    } else {
        tau + d - tau * d
    }
}

/// e^x from its Taylor series with argument halving.
pub fn oracle_exp(x: f64) -> f64 {
    let mut halvings = 0;
    let mut y = x;
    while y.abs() > 0.5 {
        y /= 2.0;
        halvings += 1;
    }
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 1..40 {
        term *= y / k as f64;
        sum += term;
    }
    for _ in 0..halvings {
        sum *= sum;
    }
    sum
}

pub fn oracle_euler(tau: f64, energy: f64) -> f64 {
    let w = tau * oracle_exp(energy);
    (tau * tau + w) / (1.0 + w)
}

pub fn oracle_qe(tau: f64, energy: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { x * x / (1.0 + x * x) } else { 0.0 };
    if energy >= 0.0 {
        tau + (1.0 - tau) * h(energy)
    } else {
        tau * (1.0 - h(-energy))
    }
}
