//! Gradual semantics over tree QBAFs.
//!
//! Every semantics is a local update rule: an argument's strength is a
//! function of its base score and the strengths of its direct attackers and
//! supporters. On a tree the rule is applied once per argument, leaves first
//! ([`evaluate`]). [`evaluate_iterative`] instead starts from the base scores
//! and applies the rule to all arguments simultaneously until nothing moves;
//! on a tree of height `h` that happens after `h + 1` rounds.
//!
//! Update rules, with `τ` the base score, `ATT`/`SUP` the attacker and
//! supporter strengths and `E = ΣSUP − ΣATT`:
//!
//! * DF-QuAD: `va = F(ATT)`, `vs = F(SUP)` with `F(v) = 1 − Π(1 − vᵢ)`, then
//!   `τ − τ·(va − vs)` if `va ≥ vs`, else `τ + (1 − τ)·(vs − va)`.
//! * Euler-based: `1 − (1 − τ²) / (1 + τ·e^E)`.
//! * Quadratic Energy: `τ − τ·h(−E) + (1 − τ)·h(E)` with
//!   `h(x) = max(0, x)² / (1 + max(0, x)²)`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::id::ArgumentId;
use crate::qbaf::{Polarity, Qbaf};
use crate::validate::ValidationReport;

/// Energy is clamped to this magnitude before exponentiation.
const ENERGY_CLAMP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Semantics {
    DfQuad,
    Euler,
    QuadraticEnergy,
}

impl Semantics {
    pub const ALL: [Semantics; 3] = [Semantics::DfQuad, Semantics::Euler, Semantics::QuadraticEnergy];

    pub fn as_str(self) -> &'static str {
        match self {
            Semantics::DfQuad => "df-quad",
            Semantics::Euler => "euler",
            Semantics::QuadraticEnergy => "quadratic-energy",
        }
    }

    /// Strength of one argument given its base score and the current
    /// strengths of its attackers and supporters. Inputs must lie in [0, 1].
    pub fn update(self, tau: f64, attackers: &[f64], supporters: &[f64]) -> f64 {
        // leaves keep their base score bit for bit; the Euler identity is
        // only exact in real arithmetic
        if attackers.is_empty() && supporters.is_empty() {
            return tau;
        }
        let value = match self {
            Semantics::DfQuad => combine(tau, aggregate(attackers), aggregate(supporters)),
            Semantics::Euler => euler(tau, energy(attackers, supporters)),
            Semantics::QuadraticEnergy => quadratic_energy(tau, energy(attackers, supporters)),
        };
        value.clamp(0.0, 1.0)
    }
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Semantics {
    type Err = SemanticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Semantics::ALL
            .into_iter()
            .find(|sem| sem.as_str() == s)
            .ok_or(SemanticsError::UnknownSemantics)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SemanticsError {
    #[error("unknown semantics; expected one of df-quad, euler, quadratic-energy")]
    UnknownSemantics,
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("energy {0} is not finite")]
    NonFiniteEnergy(f64),
    #[error("the framework is not a valid tree:\n{0}")]
    InvalidQbaf(ValidationReport),
    #[error("epsilon must be positive and max_iters at least 1")]
    InvalidIterationBounds,
    #[error("no fixed point after {iterations} iterations (last change {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

fn check_unit(name: &'static str, value: f64) -> Result<f64, SemanticsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(SemanticsError::OutOfRange { name, value })
    }
}

fn check_energy(energy: f64) -> Result<f64, SemanticsError> {
    if energy.is_finite() {
        Ok(energy)
    } else {
        Err(SemanticsError::NonFiniteEnergy(energy))
    }
}

fn aggregate(values: &[f64]) -> f64 {
    1.0 - values.iter().map(|v| 1.0 - v).product::<f64>()
}

fn combine(tau: f64, va: f64, vs: f64) -> f64 {
    if va >= vs {
        tau - tau * (va - vs)
    } else {
        tau + (1.0 - tau) * (vs - va)
    }
}

fn energy(attackers: &[f64], supporters: &[f64]) -> f64 {
    supporters.iter().sum::<f64>() - attackers.iter().sum::<f64>()
}

fn euler(tau: f64, energy: f64) -> f64 {
    let e = libm::exp(energy.clamp(-ENERGY_CLAMP, ENERGY_CLAMP));
    1.0 - (1.0 - tau * tau) / (1.0 + tau * e)
}

fn saturate(x: f64) -> f64 {
    let m = x.max(0.0);
    let sq = m * m;
    sq / (1.0 + sq)
}

fn quadratic_energy(tau: f64, energy: f64) -> f64 {
    tau - tau * saturate(-energy) + (1.0 - tau) * saturate(energy)
}

/// DF-QuAD aggregation `1 − Π(1 − vᵢ)`; 0 for no values.
pub fn dfquad_aggregate(values: &[f64]) -> Result<f64, SemanticsError> {
    for &v in values {
        check_unit("value", v)?;
    }
    Ok(aggregate(values).clamp(0.0, 1.0))
}

/// DF-QuAD combination of a base score with aggregated attack `va` and
/// aggregated support `vs`.
pub fn dfquad_combine(tau: f64, va: f64, vs: f64) -> Result<f64, SemanticsError> {
    let (tau, va, vs) = (check_unit("tau", tau)?, check_unit("va", va)?, check_unit("vs", vs)?);
    Ok(combine(tau, va, vs).clamp(0.0, 1.0))
}

/// Euler-based strength for base score `tau` and energy `ΣSUP − ΣATT`.
pub fn euler_strength(tau: f64, energy: f64) -> Result<f64, SemanticsError> {
    let (tau, energy) = (check_unit("tau", tau)?, check_energy(energy)?);
    Ok(euler(tau, energy).clamp(0.0, 1.0))
}

/// Quadratic Energy strength for base score `tau` and energy `ΣSUP − ΣATT`.
pub fn qe_strength(tau: f64, energy: f64) -> Result<f64, SemanticsError> {
    let (tau, energy) = (check_unit("tau", tau)?, check_energy(energy)?);
    Ok(quadratic_energy(tau, energy).clamp(0.0, 1.0))
}

/// Final strength of every argument under one semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthMap {
    semantics: Semantics,
    values: BTreeMap<ArgumentId, f64>,
}

impl StrengthMap {
    /// Wraps precomputed values; rejects any outside [0, 1].
    pub fn from_values(
        semantics: Semantics,
        values: impl IntoIterator<Item = (ArgumentId, f64)>,
    ) -> Result<Self, SemanticsError> {
        let values: BTreeMap<_, _> = values.into_iter().collect();
        for &v in values.values() {
            check_unit("strength", v)?;
        }
        Ok(StrengthMap { semantics, values })
    }

    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    pub fn get(&self, id: &ArgumentId) -> Option<f64> {
        self.values.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values in canonical id order.
    pub fn iter(&self) -> impl Iterator<Item = (&ArgumentId, f64)> + '_ {
        self.values.iter().map(|(k, v)| (k, *v))
    }

    /// Largest absolute difference between two maps over the same ids;
    /// `None` when the id sets differ.
    pub fn max_abs_diff(&self, other: &StrengthMap) -> Option<f64> {
        if self.values.len() != other.values.len() {
            return None;
        }
        self.values.iter().try_fold(0.0f64, |acc, (id, v)| Some(acc.max((v - other.values.get(id)?).abs())))
    }
}

/// Children of every argument, split by polarity, in canonical order.
struct Children<'a> {
    attackers: BTreeMap<&'a ArgumentId, Vec<&'a ArgumentId>>,
    supporters: BTreeMap<&'a ArgumentId, Vec<&'a ArgumentId>>,
}

impl<'a> Children<'a> {
    fn of(qbaf: &'a Qbaf) -> Self {
        let mut attackers: BTreeMap<_, Vec<_>> = BTreeMap::new();
        let mut supporters: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for edge in qbaf.edges() {
            let bucket = match edge.polarity() {
                Polarity::Attack => &mut attackers,
                Polarity::Support => &mut supporters,
            };
            bucket.entry(edge.target()).or_default().push(edge.source());
        }
        Children { attackers, supporters }
    }

    fn strengths(
        list: &BTreeMap<&'a ArgumentId, Vec<&'a ArgumentId>>,
        id: &ArgumentId,
        sigma: &BTreeMap<ArgumentId, f64>,
    ) -> Vec<f64> {
        list.get(id).map(|ids| ids.iter().map(|c| sigma[*c]).collect()).unwrap_or_default()
    }

    fn update(&self, semantics: Semantics, tau: f64, id: &ArgumentId, sigma: &BTreeMap<ArgumentId, f64>) -> f64 {
        let att = Self::strengths(&self.attackers, id, sigma);
        let sup = Self::strengths(&self.supporters, id, sigma);
        semantics.update(tau, &att, &sup)
    }
}

fn ensure_valid(qbaf: &Qbaf) -> Result<(), SemanticsError> {
    let report = qbaf.validate();
    if report.is_ok() {
        Ok(())
    } else {
        Err(SemanticsError::InvalidQbaf(report))
    }
}

/// Strength of every argument, computed leaves-first in one pass.
pub fn evaluate(qbaf: &Qbaf, semantics: Semantics) -> Result<StrengthMap, SemanticsError> {
    ensure_valid(qbaf)?;
    let children = Children::of(qbaf);

    // Deepest arguments first; every child is strictly deeper than its parent.
    let mut order: Vec<(usize, &ArgumentId)> = qbaf
        .arguments()
        .map(|a| qbaf.depth_of(a.id()).map(|d| (d, a.id())))
        .collect::<Result<_, _>>()
        .map_err(|_| SemanticsError::InvalidQbaf(qbaf.validate()))?;
    order.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));

    let mut sigma = BTreeMap::new();
    for (_, id) in order {
        let tau = qbaf.get(id).map(|a| a.base_score()).unwrap_or_default();
        let value = children.update(semantics, tau, id, &sigma);
        sigma.insert(id.clone(), value);
    }
    Ok(StrengthMap { semantics, values: sigma })
}

/// Outcome of [`evaluate_iterative`].
#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub strengths: StrengthMap,
    /// Synchronous update rounds performed, including the final one that
    /// confirmed the fixed point.
    pub iterations: usize,
    /// Largest change observed in the final round.
    pub residual: f64,
}

/// Strength of every argument by synchronous fixed-point iteration from the
/// base scores. Stops once the largest change in a round is below
/// `epsilon`; fails if that has not happened after `max_iters` rounds.
pub fn evaluate_iterative(
    qbaf: &Qbaf,
    semantics: Semantics,
    epsilon: f64,
    max_iters: usize,
) -> Result<Convergence, SemanticsError> {
    // written so that a NaN epsilon is rejected too
    if !(epsilon > 0.0) || max_iters == 0 {
        return Err(SemanticsError::InvalidIterationBounds);
    }
    ensure_valid(qbaf)?;
    let children = Children::of(qbaf);

    let mut sigma: BTreeMap<ArgumentId, f64> = qbaf.arguments().map(|a| (a.id().clone(), a.base_score())).collect();
    let mut residual = f64::INFINITY;
    for round in 1..=max_iters {
        let next: BTreeMap<ArgumentId, f64> = qbaf
            .arguments()
            .map(|a| (a.id().clone(), children.update(semantics, a.base_score(), a.id(), &sigma)))
            .collect();
        residual = next.iter().map(|(id, v)| (v - sigma[id]).abs()).fold(0.0, f64::max);
        sigma = next;
        if residual < epsilon {
            return Ok(Convergence {
                strengths: StrengthMap { semantics, values: sigma },
                iterations: round,
                residual,
            });
        }
    }
    Err(SemanticsError::NonConvergence { iterations: max_iters, residual })
}
