//! One-pass i.i.d. sampling from the proposal mixture
//!
//! ```text
//! q(x) = 1/2 * d(x, span P)^p / err_p(X, P) + 1/2 * 1/n
//! ```
//!
//! for a pivot subset `P` (empty in the shipped sampler, where the first term
//! is `|x|^p / sum |x|^p`). Draws come from banks of independent single-slot
//! weighted reservoirs, so neither the total weight nor `n` is needed before
//! the pass ends.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::geometry::{pow_p, PointSet, SubsetBasis};
use crate::stream::{DatasetSource, PassPurpose};

/// A point drawn from the stream, carrying its proposal mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub index: usize,
    pub point: Arc<[f64]>,
    pub q_mass: f64,
}

/// A point drawn with probability proportional to `weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDraw {
    pub index: usize,
    pub point: Arc<[f64]>,
    pub weight: f64,
}

type Slot = (usize, Arc<[f64]>, f64);

/// `count` independent single-item weighted reservoirs fed by one stream.
///
/// When item `j` arrives with weight `w` and the running total becomes `W`,
/// every slot independently switches to it with probability `w / W`. Since
/// the slots are exchangeable, the number of switching slots is drawn as
/// `Binomial(count, w / W)` and the switching slots as a uniform subset,
/// which has exactly the same joint law as `count` separate coin flips.
#[derive(Debug, Clone)]
pub struct ReservoirBank {
    slots: Vec<Option<Slot>>,
    total_weight: f64,
    seen: usize,
}

impl ReservoirBank {
    pub fn new(count: usize) -> Self {
        Self {
            slots: vec![None; count],
            total_weight: 0.0,
            seen: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn seen(&self) -> usize {
        self.seen
    }

    pub fn offer<R: Rng + ?Sized>(
        &mut self,
        index: usize,
        point: &[f64],
        weight: f64,
        rng: &mut R,
    ) -> Result<()> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::input(format!(
                "reservoir weight {weight} of point {index} is not a finite non-negative number"
            )));
        }
        self.seen += 1;
        if weight == 0.0 || self.slots.is_empty() {
            return Ok(());
        }
        self.total_weight += weight;
        let share = weight / self.total_weight;
        let count = self.slots.len();
        let hits = if share >= 1.0 {
            count
        } else {
            Binomial::new(count as u64, share)
                .map_err(|e| Error::Internal(format!("binomial({count}, {share}): {e}")))?
                .sample(rng) as usize
        };
        if hits == 0 {
            return Ok(());
        }
        let shared: Arc<[f64]> = Arc::from(point);
        if hits == count {
            for slot in &mut self.slots {
                *slot = Some((index, shared.clone(), weight));
            }
        } else {
            for s in index::sample(rng, count, hits) {
                self.slots[s] = Some((index, shared.clone(), weight));
            }
        }
        Ok(())
    }

    /// Final contents, one draw per slot.
    pub fn finish(self) -> Result<Vec<WeightedDraw>> {
        if self.seen == 0 {
            return Err(Error::input("cannot sample from an empty stream"));
        }
        if self.total_weight == 0.0 {
            return Err(Error::input("all sampling weights are zero"));
        }
        self.slots
            .into_iter()
            .map(|slot| {
                let (index, point, weight) =
                    slot.ok_or_else(|| Error::Internal("unfilled reservoir slot".into()))?;
                Ok(WeightedDraw {
                    index,
                    point,
                    weight,
                })
            })
            .collect()
    }
}

/// Draws `count` i.i.d. points with probability `weight_fn(x) / sum weight_fn`
/// in a single selection pass over `source`.
pub fn reservoir_draw_iid<F, R>(
    source: &DatasetSource,
    mut weight_fn: F,
    count: usize,
    rng: &mut R,
) -> Result<Vec<WeightedDraw>>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if count == 0 {
        return Err(Error::param("draw count must be at least 1"));
    }
    let mut bank = ReservoirBank::new(count);
    source.iterate_once(PassPurpose::Selection, |i, pt| {
        let w = weight_fn(pt);
        bank.offer(i, pt, w, rng)
    })?;
    bank.finish()
}

/// The proposal distribution `q` for a given pivot subset.
#[derive(Debug, Clone)]
pub struct MixtureWeights {
    pivot: SubsetBasis,
    p: f64,
    pivot_err: f64,
    n: usize,
}

impl MixtureWeights {
    /// Fits `q` to a materialized point set.
    pub fn new(x: &PointSet, pivot: SubsetBasis, p: f64) -> Result<Self> {
        let pivot_err = crate::geometry::err_p(x, &pivot, p)?;
        Ok(Self {
            pivot,
            p,
            pivot_err,
            n: x.len(),
        })
    }

    /// `q` for the empty pivot, from totals accumulated during a pass.
    pub fn from_totals(dim: usize, p: f64, norm_total: f64, n: usize) -> Self {
        Self {
            pivot: SubsetBasis::empty(dim),
            p,
            pivot_err: norm_total,
            n,
        }
    }

    pub fn pivot(&self) -> &SubsetBasis {
        &self.pivot
    }

    pub fn pivot_err(&self) -> f64 {
        self.pivot_err
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `q(x)`. If every point lies in the pivot span the residual term is
    /// undefined and `q` is uniform.
    pub fn mass(&self, x: &[f64]) -> f64 {
        let uniform = 1.0 / self.n as f64;
        if self.pivot_err > 0.0 {
            let residual = pow_p(self.pivot.dist_unchecked(x), self.p);
            0.5 * (residual / self.pivot_err) + 0.5 * uniform
        } else {
            uniform
        }
    }

    /// `q` evaluated on every point of `x`, in index order.
    pub fn masses(&self, x: &PointSet) -> Vec<f64> {
        x.iter().map(|pt| self.mass(pt)).collect()
    }
}

/// An ordered pool of i.i.d. draws from `q`.
#[derive(Debug, Clone)]
pub struct ProposalPool {
    draws: Vec<Draw>,
    weights: MixtureWeights,
}

impl ProposalPool {
    pub fn draws(&self) -> &[Draw] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn weights(&self) -> &MixtureWeights {
        &self.weights
    }

    /// Contiguous block `[offset, offset + len)`; running past the end means
    /// the pool was sized too small.
    pub fn slice(&self, offset: usize, len: usize) -> Result<&[Draw]> {
        self.draws.get(offset..offset + len).ok_or_else(|| {
            Error::Internal(format!(
                "proposal pool exhausted: requested draws {offset}..{} of {}",
                offset + len,
                self.draws.len()
            ))
        })
    }
}

/// Builds a pool of `pool_size` i.i.d. draws from `q` (empty pivot) in one
/// selection pass.
pub fn draw_mixture_pool<R: Rng + ?Sized>(
    source: &DatasetSource,
    p: f64,
    pool_size: usize,
    rng: &mut R,
) -> Result<ProposalPool> {
    draw_mixture_pool_with_pivot(source, &SubsetBasis::empty(source.dim()), p, pool_size, rng)
}

/// Pivot-generic form of [`draw_mixture_pool`].
pub fn draw_mixture_pool_with_pivot<R: Rng + ?Sized>(
    source: &DatasetSource,
    pivot: &SubsetBasis,
    p: f64,
    pool_size: usize,
    rng: &mut R,
) -> Result<ProposalPool> {
    crate::geometry::check_exponent(p)?;
    if pool_size == 0 {
        return Err(Error::param("pool size must be at least 1"));
    }
    if pivot.dim() != source.dim() {
        return Err(Error::input("pivot dimension differs from the data dimension"));
    }
    // fair coin per slot: heads takes the residual bank, tails the uniform bank
    let heads: Vec<bool> = (0..pool_size).map(|_| rng.gen::<bool>()).collect();
    let head_count = heads.iter().filter(|&&h| h).count();
    let mut residual_bank = ReservoirBank::new(head_count);
    let mut uniform_bank = ReservoirBank::new(pool_size);
    source.iterate_once(PassPurpose::Selection, |i, pt| {
        let w = pow_p(pivot.dist_unchecked(pt), p);
        residual_bank.offer(i, pt, w, rng)?;
        uniform_bank.offer(i, pt, 1.0, rng)
    })?;

    let n = uniform_bank.seen();
    let weights = MixtureWeights {
        pivot: pivot.clone(),
        p,
        pivot_err: residual_bank.total_weight(),
        n,
    };
    let uniform = uniform_bank.finish()?;
    let residual = if weights.pivot_err > 0.0 {
        Some(residual_bank.finish()?)
    } else {
        None
    };
    let mut residual_iter = residual.into_iter().flatten();
    let draws = heads
        .iter()
        .zip(uniform)
        .map(|(&head, uniform_draw)| {
            let picked = if head {
                residual_iter.next().unwrap_or(uniform_draw)
            } else {
                uniform_draw
            };
            Draw {
                q_mass: weights.mass(&picked.point),
                index: picked.index,
                point: picked.point,
            }
        })
        .collect();
    Ok(ProposalPool { draws, weights })
}
