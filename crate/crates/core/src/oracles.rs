//! Exact reference computations for small instances: explicit sampling
//! distributions, the independence-Metropolis transition matrix and its
//! powers, mixing bounds, and optimal or surrogate-optimal subspace errors.

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{err_p, pow_p, PointSet, SubsetBasis};
use crate::proposal::MixtureWeights;

/// Largest `n` accepted by the dense Markov-chain oracles.
pub const MAX_CHAIN_POINTS: usize = 64;
/// Largest `n` accepted by the k-subset enumeration.
pub const MAX_ENUMERATION_POINTS: usize = 18;
/// Largest `k` accepted by the k-subset enumeration.
pub const MAX_ENUMERATION_K: usize = 3;

const SUM_TOLERANCE: f64 = 1e-12;

/// An explicit probability vector indexed by point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionTable {
    masses: Vec<f64>,
}

impl DistributionTable {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::input("distribution over an empty index set"));
        }
        if masses.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(Error::input("probability masses must be finite and non-negative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE * masses.len().max(1) as f64 {
            return Err(Error::input(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { masses })
    }

    /// Normalized empirical frequencies of observed indices.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::input("no observations"));
        }
        Self::new(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    /// Adaptive sampling distribution `p_S(x) = d(x, span S)^p / err_p(X, S)`.
    pub fn adaptive(x: &PointSet, basis: &SubsetBasis, p: f64) -> Result<Self> {
        let weights: Vec<f64> = x
            .iter()
            .map(|pt| basis.dist_to_span(pt).map(|d| pow_p(d, p)))
            .collect::<Result<_>>()?;
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::input("adaptive distribution undefined: err_p(X, S) = 0"));
        }
        Ok(Self {
            masses: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Proposal mixture `q` for the given pivot.
    pub fn mixture(x: &PointSet, pivot: &SubsetBasis, p: f64) -> Result<Self> {
        Ok(Self {
            masses: MixtureWeights::new(x, pivot.clone(), p)?.masses(x),
        })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
}

/// `1/2 * sum |a - b|`.
pub fn tv_distance(a: &DistributionTable, b: &DistributionTable) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "distributions over {} and {} points",
            a.len(),
            b.len()
        )));
    }
    Ok(0.5 * a.masses.iter().zip(&b.masses).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Dense row-stochastic matrix of the independence-Metropolis walk with
/// proposal `q` and target `p_S`.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// `P(x -> y) = q(y) min(1, p_S(y) q(x) / (p_S(x) q(y)))` for `y != x`;
    /// the diagonal absorbs rejected proposals. From a point with
    /// `p_S(x) = 0` every proposal is accepted.
    pub fn build(target: &DistributionTable, proposal: &DistributionTable) -> Result<Self> {
        let n = target.len();
        if proposal.len() != n {
            return Err(Error::input("target and proposal differ in length"));
        }
        if n > MAX_CHAIN_POINTS {
            return Err(Error::Guard(format!(
                "transition matrix needs n <= {MAX_CHAIN_POINTS}, got {n}"
            )));
        }
        let (ps, q) = (target.masses(), proposal.masses());
        if q.iter().any(|&v| v <= 0.0) {
            return Err(Error::input("proposal must put positive mass on every point"));
        }
        let mut entries = vec![0.0; n * n];
        for from in 0..n {
            let mut moved = 0.0;
            for to in 0..n {
                if to == from {
                    continue;
                }
                let accept = if ps[from] == 0.0 {
                    1.0
                } else {
                    (ps[to] * q[from] / (ps[from] * q[to])).min(1.0)
                };
                let mass = q[to] * accept;
                entries[from * n + to] = mass;
                moved += mass;
            }
            entries[from * n + from] = 1.0 - moved;
        }
        Ok(Self { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn entry(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.n + to]
    }

    /// Row vector times matrix: the law after one more step.
    pub fn step(&self, dist: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (from, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let row = &self.entries[from * self.n..(from + 1) * self.n];
            for (o, &pij) in out.iter_mut().zip(row) {
                *o += mass * pij;
            }
        }
        out
    }
}

/// Exact law of the walk's position after `m` steps from a `q`-distributed start.
pub fn exact_walk_distribution(
    x: &PointSet,
    basis: &SubsetBasis,
    pivot: &SubsetBasis,
    p: f64,
    m: usize,
) -> Result<DistributionTable> {
    if x.len() > MAX_CHAIN_POINTS {
        return Err(Error::Guard(format!(
            "exact walk distribution needs n <= {MAX_CHAIN_POINTS}, got {}",
            x.len()
        )));
    }
    let target = DistributionTable::adaptive(x, basis, p)?;
    let proposal = DistributionTable::mixture(x, pivot, p)?;
    let chain = TransitionMatrix::build(&target, &proposal)?;
    let mut dist = proposal.masses;
    for _ in 0..m {
        dist = chain.step(&dist);
    }
    Ok(DistributionTable { masses: dist })
}

/// `gamma = max_x p_S(x) / q(x)` and the quantities needed to check it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaReport {
    pub gamma: f64,
    /// `err_p(X, S)`
    pub err_subset: f64,
    /// `err_p(X, pivot)`
    pub err_pivot: f64,
}

impl GammaReport {
    /// `(1 - 1/gamma)^(m - 1)`, the TV bound after `m >= 1` steps.
    pub fn mixing_bound(&self, m: usize) -> f64 {
        let base = 1.0 - 1.0 / self.gamma;
        base.max(0.0).powi(m as i32 - 1)
    }

    /// Whether `err_p(X, S) > epsilon1 * err_p(X, pivot)`.
    pub fn gap_condition(&self, epsilon1: f64) -> bool {
        self.err_subset > epsilon1 * self.err_pivot
    }

    /// `Some(gamma <= 2 / epsilon1)` when the condition holds, `None` otherwise.
    pub fn check_gamma_bound(&self, epsilon1: f64) -> Option<bool> {
        self.gap_condition(epsilon1)
            .then(|| self.gamma <= 2.0 / epsilon1)
    }
}

pub fn gamma_bound(x: &PointSet, basis: &SubsetBasis, pivot: &SubsetBasis, p: f64) -> Result<GammaReport> {
    let target = DistributionTable::adaptive(x, basis, p)?;
    let proposal = DistributionTable::mixture(x, pivot, p)?;
    let gamma = target
        .masses
        .iter()
        .zip(&proposal.masses)
        .map(|(a, b)| a / b)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GammaReport {
        gamma,
        err_subset: err_p(x, basis, p)?,
        err_pivot: err_p(x, pivot, p)?,
    })
}

/// Exact TV between the `m`-step walk law and `p_S`, alongside its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleReport {
    pub gamma: f64,
    pub tv: f64,
    pub mixing_bound: f64,
}

pub fn walk_report(
    x: &PointSet,
    basis: &SubsetBasis,
    pivot: &SubsetBasis,
    p: f64,
    m: usize,
) -> Result<OracleReport> {
    let gamma = gamma_bound(x, basis, pivot, p)?;
    let walked = exact_walk_distribution(x, basis, pivot, p, m)?;
    let target = DistributionTable::adaptive(x, basis, p)?;
    Ok(OracleReport {
        gamma: gamma.gamma,
        tv: tv_distance(&walked, &target)?,
        mixing_bound: gamma.mixing_bound(m),
    })
}

/// Optimal rank-`k` error for `p = 2`: the sum of squared singular values
/// beyond the `k` largest.
pub fn svd_optimal_err2(x: &PointSet, k: usize) -> Result<f64> {
    if k == 0 || k > x.dim() {
        return Err(Error::param(format!("k = {k} must lie in [1, {}]", x.dim())));
    }
    let matrix = DMatrix::from_row_slice(x.len(), x.dim(), x.as_flat());
    let mut sv: Vec<f64> = matrix.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv.iter().skip(k).map(|s| s * s).sum())
}

/// `min over k-subsets T of X of err_p(X, span T)`, an upper bound on the
/// optimal `l_p` error over all `k`-dimensional subspaces.
pub fn brute_force_candidate_err(x: &PointSet, k: usize, p: f64) -> Result<f64> {
    let n = x.len();
    if n > MAX_ENUMERATION_POINTS || k > MAX_ENUMERATION_K {
        return Err(Error::Guard(format!(
            "k-subset enumeration needs n <= {MAX_ENUMERATION_POINTS} and k <= {MAX_ENUMERATION_K}, got n = {n}, k = {k}"
        )));
    }
    if k == 0 || k > x.dim() {
        return Err(Error::param(format!("k = {k} must lie in [1, {}]", x.dim())));
    }
    let k = k.min(n);
    let mut best = f64::INFINITY;
    for subset in (0..n).combinations(k) {
        let basis = SubsetBasis::from_indices(x, &subset)?;
        best = best.min(err_p(x, &basis, p)?);
    }
    Ok(best)
}
