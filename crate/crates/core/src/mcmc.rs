//! Adaptive sampling simulated by independence Metropolis walks over a
//! pre-drawn proposal pool.
//!
//! Adaptive sampling w.r.t. `S` picks `x` with probability
//! `p_S(x) = d(x, span S)^p / err_p(X, S)`. Computing it needs a fresh pass
//! per round. Instead, one pass draws i.i.d. proposals from the fixed mixture
//! `q` (see [`crate::proposal`]); each round then runs `t` walks of `m` steps
//! whose stationary law is `p_S`, and adds only each walk's final point.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::Open01;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{check_exponent, pow_p, SubsetBasis};
use crate::proposal::{draw_mixture_pool, Draw, ProposalPool};
use crate::rng::{stream_rng, POOL_STREAM, WALK_STREAM};
use crate::stream::DatasetSource;

/// Upper limit on a derived count before we ask for an explicit override.
const MAX_DERIVED_COUNT: f64 = 1e9;

/// Accuracy parameters attached to a configuration derived from `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracyParams {
    pub delta: f64,
    /// `delta / 4`
    pub epsilon: f64,
    /// `delta^p / 2^(p+1)`
    pub epsilon1: f64,
    /// `delta^p / (2^(p+1) t l)`
    pub epsilon2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub k: usize,
    pub p: f64,
    /// Points drawn per round.
    pub t: usize,
    /// Rounds.
    pub l: usize,
    /// Steps per walk.
    pub m: usize,
    /// Independent repetitions; the best one is kept by the driver.
    pub repetitions: usize,
    pub seed: u64,
    pub accuracy: Option<AccuracyParams>,
}

/// Compares the configured walk length with the length under which a
/// single walk is within `epsilon2` of adaptive sampling whenever
/// `err_p(X, S) > epsilon1 * err_p(X, empty)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkLengthReport {
    pub configured_m: usize,
    /// `1 + (2 / epsilon1) ln(1 / epsilon2)`
    pub required_m: f64,
    pub sufficient: bool,
}

impl SamplerConfig {
    pub fn new(k: usize, p: f64, t: usize, l: usize, m: usize, repetitions: usize, seed: u64) -> Result<Self> {
        let config = Self {
            k,
            p,
            t,
            l,
            m,
            repetitions,
            seed,
            accuracy: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        if self.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if self.t == 0 || self.repetitions == 0 {
            return Err(Error::param("t and repetitions must be at least 1"));
        }
        if let Some(acc) = &self.accuracy {
            for (name, v) in [
                ("epsilon", acc.epsilon),
                ("epsilon1", acc.epsilon1),
                ("epsilon2", acc.epsilon2),
            ] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::param(format!("{name} = {v} must lie in (0, 1)")));
                }
            }
        }
        self.pool_size().map(|_| ())
    }

    /// `R * l * t * (m + 1)`: every walk consumes a start draw plus `m` proposals.
    pub fn pool_size(&self) -> Result<usize> {
        [self.l, self.t, self.m + 1]
            .iter()
            .try_fold(self.repetitions, |acc, &f| acc.checked_mul(f))
            .ok_or_else(|| Error::param("proposal pool size overflows"))
    }

    pub fn walk_length_report(&self) -> Option<WalkLengthReport> {
        self.accuracy.map(|acc| {
            let required_m = 1.0 + (2.0 / acc.epsilon1) * (1.0 / acc.epsilon2).ln();
            WalkLengthReport {
                configured_m: self.m,
                required_m,
                sufficient: self.m as f64 >= required_m,
            }
        })
    }
}

fn derived_count(value: f64, what: &str) -> Result<usize> {
    let c = value.ceil();
    if !(c.is_finite() && c <= MAX_DERIVED_COUNT) {
        return Err(Error::param(format!(
            "derived {what} = {value:.3e} is too large; pass an explicit override"
        )));
    }
    Ok((c as usize).max(1))
}

/// Parameters achieving an additive `delta * err_p(X, empty)^(1/p)` guarantee,
/// with the polylog factor of `t` fixed to `ln(2 + k/epsilon)`.
pub fn theorem_params(k: usize, p: f64, delta: f64, t_override: Option<usize>) -> Result<SamplerConfig> {
    theorem_params_scaled(k, p, delta, t_override, 1.0)
}

/// [`theorem_params`] with the constant in front of `t` set to `c_t`.
pub fn theorem_params_scaled(
    k: usize,
    p: f64,
    delta: f64,
    t_override: Option<usize>,
    c_t: f64,
) -> Result<SamplerConfig> {
    check_exponent(p)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta = {delta} must lie in (0, 1)")));
    }
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if !(c_t > 0.0 && c_t.is_finite()) {
        return Err(Error::param(format!("c_t = {c_t} must be positive")));
    }
    let kf = k as f64;
    let epsilon = delta / 4.0;
    let delta_p = delta.powf(p);
    let epsilon1 = delta_p / 2f64.powf(p + 1.0);
    let l = k;
    let t = match t_override {
        Some(0) => return Err(Error::param("t override must be at least 1")),
        Some(t) => t,
        None => {
            let ratio = kf / epsilon;
            let base = derived_count(ratio.powf(p + 1.0) * (2.0 + ratio).ln(), "t")?;
            derived_count(c_t * base as f64, "t")?
        }
    };
    let epsilon2 = delta_p / (2f64.powf(p + 1.0) * t as f64 * l as f64);
    let m = derived_count(1.0 + (2.0 / delta_p) * (kf / delta_p).ln(), "m")?;
    let repetitions = derived_count(2.0 * kf * (1.0 / epsilon).ln(), "repetitions")?;
    let config = SamplerConfig {
        k,
        p,
        t,
        l,
        m,
        repetitions,
        seed: 0,
        accuracy: Some(AccuracyParams {
            delta,
            epsilon,
            epsilon1,
            epsilon2,
        }),
    };
    config.validate()?;
    Ok(config)
}

/// Metropolis acceptance ratio for moving from `x` to `y` when targeting `p_S`:
///
/// ```text
/// d(y, span S)^p q(x) / (d(x, span S)^p q(y))
/// ```
///
/// If `x` is covered by the span the ratio is `+inf` when `y` is not and `1`
/// when both are.
pub fn acceptance_ratio(x: &Draw, y: &Draw, basis: &SubsetBasis, p: f64) -> Result<f64> {
    let dx = basis.dist_to_span(&x.point)?;
    let dy = basis.dist_to_span(&y.point)?;
    Ok(ratio_from_distances(dx, dy, x.q_mass, y.q_mass, p))
}

fn ratio_from_distances(dx: f64, dy: f64, qx: f64, qy: f64, p: f64) -> f64 {
    match (dx == 0.0, dy == 0.0) {
        (true, true) => 1.0,
        (true, false) => f64::INFINITY,
        (false, true) => 0.0,
        (false, false) => pow_p(dy / dx, p) * (qx / qy),
    }
}

/// Runs an `m`-step independence walk: starts at `block[0]` and proposes
/// `block[1..]` in order, moving iff the acceptance ratio exceeds a fresh
/// uniform `r` in `(0, 1)`.
pub fn random_walk<'a, R: Rng + ?Sized>(
    block: &'a [Draw],
    basis: &SubsetBasis,
    p: f64,
    rng: &mut R,
) -> Result<&'a Draw> {
    let (mut current, proposals) = block
        .split_first()
        .ok_or_else(|| Error::Internal("random walk needs a start draw".into()))?;
    let mut current_dist = basis.dist_to_span(&current.point)?;
    for y in proposals {
        let y_dist = basis.dist_to_span(&y.point)?;
        let ratio = ratio_from_distances(current_dist, y_dist, current.q_mass, y.q_mass, p);
        let r: f64 = rng.sample(Open01);
        if ratio > r {
            current = y;
            current_dist = y_dist;
        }
    }
    Ok(current)
}

/// Output of [`one_pass_adaptive_sample`].
#[derive(Debug, Clone)]
pub struct OnePassSample {
    /// One subset per repetition.
    pub subsets: Vec<SubsetBasis>,
    pub pool_size: usize,
    /// Time spent in the selection pass building the pool.
    pub pass_time: Duration,
    /// Time spent running walks after the pass.
    pub walk_time: Duration,
}

/// One-pass approximate adaptive sampling.
///
/// A single selection pass builds a proposal pool shared by all repetitions.
/// Each repetition then starts from `S = {}` and runs `l` rounds; in each
/// round `t` walks run against the span frozen at the start of the round and
/// their end points are added to `S` (duplicates collapse). A repetition
/// stops early once `span S` is all of `R^d`.
pub fn one_pass_adaptive_sample(source: &DatasetSource, config: &SamplerConfig) -> Result<OnePassSample> {
    config.validate()?;
    let pool_size = config.pool_size()?;
    let started = Instant::now();
    let mut pool_rng = stream_rng(config.seed, &[POOL_STREAM]);
    // with l = 0 nothing is consumed, but the pass still runs so that the
    // data are validated and the pass accounting is uniform
    let pool = draw_mixture_pool(source, config.p, pool_size.max(1), &mut pool_rng)?;
    let pass_time = started.elapsed();

    let started = Instant::now();
    let subsets = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| sample_repetition(&pool, config, rep, source.dim()))
        .collect::<Result<Vec<_>>>()?;
    let walk_time = started.elapsed();
    Ok(OnePassSample {
        subsets,
        pool_size,
        pass_time,
        walk_time,
    })
}

/// Rounds of walks for one repetition, reading only that repetition's pool blocks.
pub fn sample_repetition(
    pool: &ProposalPool,
    config: &SamplerConfig,
    repetition: usize,
    dim: usize,
) -> Result<SubsetBasis> {
    let block = config.m + 1;
    let mut subset = SubsetBasis::empty(dim);
    for round in 0..config.l {
        if subset.rank() == dim {
            break;
        }
        let mut picked = Vec::with_capacity(config.t);
        for walk in 0..config.t {
            let offset = ((repetition * config.l + round) * config.t + walk) * block;
            let draws = pool.slice(offset, block)?;
            let mut rng = stream_rng(
                config.seed,
                &[WALK_STREAM, repetition as u64, round as u64, walk as u64],
            );
            picked.push(random_walk(draws, &subset, config.p, &mut rng)?);
        }
        for draw in picked {
            if !subset.contains(draw.index) {
                subset.push(draw.index, &draw.point)?;
            }
        }
    }
    Ok(subset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn draw(index: usize, point: &[f64], q: f64) -> Draw {
        Draw {
            index,
            point: Arc::from(point),
            q_mass: q,
        }
    }

    #[test]
    fn theorem_params_examples() {
        let c = theorem_params(2, 1.0, 0.5, None).unwrap();
        let acc = c.accuracy.unwrap();
        assert_eq!(acc.epsilon, 0.125);
        assert_eq!(acc.epsilon1, 0.125);
        // 1 + 4 ln 4 = 6.545...
        assert_eq!(c.m, 7);
        assert_eq!(c.l, 2);
        // 2 * 2 * ln 8 = 8.318...
        assert_eq!(c.repetitions, 9);
        // (16)^2 * ln 18 = 739.93...
        assert_eq!(c.t, 740);
        assert!((acc.epsilon2 - 0.125 / (740.0 * 2.0)).abs() < 1e-18);

        let c = theorem_params(1, 2.0, 0.5, Some(10)).unwrap();
        assert_eq!(c.accuracy.unwrap().epsilon1, 0.03125);
        assert_eq!(c.t, 10);
        assert_eq!(c.accuracy.unwrap().epsilon2, 0.03125 / 10.0);
    }

    #[test]
    fn theorem_params_rejects_bad_delta() {
        assert!(matches!(theorem_params(2, 1.0, 0.0, None), Err(Error::Parameter(_))));
        assert!(matches!(theorem_params(2, 1.0, 1.0, None), Err(Error::Parameter(_))));
        assert!(theorem_params(2, 1.0, f64::NAN, None).is_err());
        assert!(theorem_params(2, 0.5, 0.5, None).is_err());
        // (k / epsilon)^(p+1) = 40^7 needs an explicit t
        assert!(theorem_params(5, 6.0, 0.5, None).is_err());
        assert!(theorem_params(5, 6.0, 0.5, Some(4)).is_ok());
    }

    #[test]
    fn walk_length_diagnostic_is_reported() {
        let c = theorem_params(2, 1.0, 0.5, Some(10)).unwrap();
        let report = c.walk_length_report().unwrap();
        let acc = c.accuracy.unwrap();
        let required = 1.0 + 2.0 / acc.epsilon1 * (1.0 / acc.epsilon2).ln();
        assert_eq!(report.required_m, required);
        assert_eq!(report.sufficient, c.m as f64 >= required);
        // the derived walk length is shorter than the single-draw requirement here
        assert!(!report.sufficient);
        assert!(SamplerConfig::new(1, 2.0, 1, 1, 1, 1, 0).unwrap().walk_length_report().is_none());
    }

    #[test]
    fn ratio_examples() {
        let basis = SubsetBasis::from_indices(
            &PointSet::new(vec![vec![1.0, 0.0]]).unwrap(),
            &[0],
        )
        .unwrap();
        let x = draw(0, &[5.0, 1.0], 0.3);
        let y = draw(1, &[-2.0, 2.0], 0.3);
        assert_eq!(acceptance_ratio(&x, &x, &basis, 2.0).unwrap(), 1.0);
        assert_eq!(acceptance_ratio(&x, &y, &basis, 2.0).unwrap(), 4.0);
        let covered = draw(2, &[3.0, 0.0], 0.1);
        assert_eq!(acceptance_ratio(&covered, &y, &basis, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(acceptance_ratio(&covered, &covered, &basis, 1.0).unwrap(), 1.0);
        assert_eq!(acceptance_ratio(&y, &covered, &basis, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_step_walk_returns_start() {
        let block = [draw(4, &[1.0], 0.5)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = random_walk(&block, &SubsetBasis::empty(1), 2.0, &mut rng).unwrap();
        assert_eq!(out.index, 4);
        assert!(random_walk(&[], &SubsetBasis::empty(1), 2.0, &mut rng).is_err());
    }

    #[test]
    fn walk_leaves_covered_start_at_first_uncovered_proposal() {
        let x = PointSet::new(vec![vec![1.0, 0.0]]).unwrap();
        let basis = SubsetBasis::from_indices(&x, &[0]).unwrap();
        let block = [
            draw(0, &[2.0, 0.0], 0.2),
            draw(1, &[-1.0, 0.0], 0.2),
            draw(2, &[0.0, 1e-3], 0.9),
            draw(3, &[7.0, 0.0], 0.2),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // proposal 1 is covered too (ratio 1, moves), proposal 2 is taken with
        // ratio +inf, proposal 3 has ratio 0
        let out = random_walk(&block, &basis, 2.0, &mut rng).unwrap();
        assert_eq!(out.index, 2);
    }

    #[test]
    fn zero_rounds_give_empty_subset() {
        let src = DatasetSource::in_memory(PointSet::new(vec![vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap());
        let config = SamplerConfig::new(1, 2.0, 3, 0, 4, 2, 5).unwrap();
        let out = one_pass_adaptive_sample(&src, &config).unwrap();
        assert_eq!(out.subsets.len(), 2);
        assert!(out.subsets.iter().all(SubsetBasis::is_empty));
        assert_eq!(src.passes().selection, 1);
    }

    #[test]
    fn sampler_is_deterministic_one_pass_and_bounded() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let f = i as f64;
                vec![f.sin(), (2.0 * f).cos(), 0.1 * f, (f * 0.7).sin() * 3.0]
            })
            .collect();
        let x = PointSet::new(rows).unwrap();
        let config = SamplerConfig::new(2, 1.5, 3, 2, 6, 4, 99).unwrap();
        let a = DatasetSource::in_memory(x.clone());
        let b = DatasetSource::in_memory(x);
        let sa = one_pass_adaptive_sample(&a, &config).unwrap();
        let sb = one_pass_adaptive_sample(&b, &config).unwrap();
        assert_eq!(sa.subsets, sb.subsets);
        assert_eq!(a.passes().selection, 1);
        assert_eq!(a.passes().evaluation, 0);
        assert_eq!(sa.pool_size, 4 * 2 * 3 * 7);
        for s in &sa.subsets {
            assert!(s.members().len() <= config.t * config.l);
            let mut sorted = s.members().to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), s.members().len());
        }
    }

    #[test]
    fn full_span_stops_early() {
        let x = PointSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let src = DatasetSource::in_memory(x);
        let config = SamplerConfig::new(2, 2.0, 4, 5, 30, 3, 1).unwrap();
        let out = one_pass_adaptive_sample(&src, &config).unwrap();
        for s in &out.subsets {
            assert_eq!(s.rank(), 2);
            assert!(s.members().len() <= 3);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(1, 2.0, 0, 1, 1, 1, 0).is_err());
        assert!(SamplerConfig::new(1, 2.0, 1, 1, 1, 0, 0).is_err());
        assert!(SamplerConfig::new(0, 2.0, 1, 1, 1, 1, 0).is_err());
        assert!(SamplerConfig::new(1, 2.0, usize::MAX, 2, 1, 1, 0).is_err());
    }
}
