//! Competing selection procedures: exact multi-pass adaptive sampling and
//! one-shot length-power (squared-length for `p = 2`) sampling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{check_exponent, norm, pow_p, SubsetBasis};
use crate::proposal::{reservoir_draw_iid, ReservoirBank};
use crate::rng::{stream_rng, SamplerRng, EXACT_STREAM};
use crate::stream::{DatasetSource, PassPurpose};

/// Exact adaptive sampling: `l` rounds, each spending one selection pass to
/// draw `t` i.i.d. points with probability proportional to `d(x, span S)^p`.
///
/// Stops early (with fewer passes) once a pass finds `err_p(X, S) = 0`.
pub fn exact_adaptive_sample<R: Rng + ?Sized>(
    source: &DatasetSource,
    p: f64,
    t: usize,
    l: usize,
    rng: &mut R,
) -> Result<SubsetBasis> {
    check_exponent(p)?;
    if t == 0 {
        return Err(Error::param("t must be at least 1"));
    }
    let mut subset = SubsetBasis::empty(source.dim());
    for _ in 0..l {
        if !adaptive_round(source, p, t, &mut [(&mut subset, rng)])? {
            break;
        }
    }
    Ok(subset)
}

/// `repetitions` independent runs of [`exact_adaptive_sample`] that share
/// each round's pass, so the whole batch costs at most `l` selection passes.
/// Repetition `r` draws from its own stream derived from `seed`.
pub fn exact_adaptive_sample_batch(
    source: &DatasetSource,
    p: f64,
    t: usize,
    l: usize,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<SubsetBasis>> {
    check_exponent(p)?;
    if t == 0 || repetitions == 0 {
        return Err(Error::param("t and repetitions must be at least 1"));
    }
    let mut subsets = vec![SubsetBasis::empty(source.dim()); repetitions];
    let mut rngs: Vec<SamplerRng> = (0..repetitions)
        .map(|r| stream_rng(seed, &[EXACT_STREAM, r as u64]))
        .collect();
    let mut active: Vec<bool> = vec![true; repetitions];
    for _ in 0..l {
        let mut lanes: Vec<(&mut SubsetBasis, &mut SamplerRng)> = subsets
            .iter_mut()
            .zip(rngs.iter_mut())
            .zip(&active)
            .filter(|(_, &a)| a)
            .map(|((s, r), _)| (s, r))
            .collect();
        if lanes.is_empty() {
            break;
        }
        let progressed = adaptive_round_each(source, p, t, &mut lanes)?;
        let mut it = progressed.into_iter();
        for a in active.iter_mut().filter(|a| **a) {
            *a = it.next().unwrap_or(false);
        }
    }
    Ok(subsets)
}

fn adaptive_round<R: Rng + ?Sized>(
    source: &DatasetSource,
    p: f64,
    t: usize,
    lanes: &mut [(&mut SubsetBasis, &mut R)],
) -> Result<bool> {
    Ok(adaptive_round_each(source, p, t, lanes)?[0])
}

/// One shared pass; each lane draws `t` points from its own `p_S`. Returns,
/// per lane, whether `err_p(X, S) > 0` (i.e. whether points were added).
fn adaptive_round_each<R: Rng + ?Sized>(
    source: &DatasetSource,
    p: f64,
    t: usize,
    lanes: &mut [(&mut SubsetBasis, &mut R)],
) -> Result<Vec<bool>> {
    let mut banks: Vec<ReservoirBank> = lanes.iter().map(|_| ReservoirBank::new(t)).collect();
    source.iterate_once(PassPurpose::Selection, |i, pt| {
        for ((subset, rng), bank) in lanes.iter_mut().zip(banks.iter_mut()) {
            let w = pow_p(subset.dist_to_span(pt)?, p);
            bank.offer(i, pt, w, &mut **rng)?;
        }
        Ok(())
    })?;
    let mut progressed = Vec::with_capacity(lanes.len());
    for ((subset, _), bank) in lanes.iter_mut().zip(banks) {
        if bank.total_weight() == 0.0 {
            progressed.push(false);
            continue;
        }
        for draw in bank.finish()? {
            if !subset.contains(draw.index) {
                subset.push(draw.index, &draw.point)?;
            }
        }
        progressed.push(true);
    }
    Ok(progressed)
}

/// `count` i.i.d. points drawn in one pass with probability proportional to
/// `|x|^p`, kept with repetitions, and the span they generate.
pub fn squared_length_sample<R: Rng + ?Sized>(
    source: &DatasetSource,
    p: f64,
    count: usize,
    rng: &mut R,
) -> Result<SubsetBasis> {
    check_exponent(p)?;
    let draws = reservoir_draw_iid(source, |x| pow_p(norm(x), p), count, rng)?;
    let mut subset = SubsetBasis::empty(source.dim());
    for d in draws {
        subset.push(d.index, &d.point)?;
    }
    Ok(subset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{err_p, PointSet};
    use crate::oracles::{tv_distance, DistributionTable};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn source(rows: Vec<Vec<f64>>) -> DatasetSource {
        DatasetSource::in_memory(PointSet::new(rows).unwrap())
    }

    #[test]
    fn first_round_prefers_longer_point() {
        let mut hits = 0;
        let trials: u64 = 20_000;
        for seed in 0..trials {
            let src = source(vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = exact_adaptive_sample(&src, 2.0, 1, 1, &mut rng).unwrap();
            if s.members() == [1] {
                hits += 1;
            }
            assert_eq!(src.passes().selection, 1);
        }
        let freq = hits as f64 / trials as f64;
        // 4 / 5, with a 4-sigma allowance
        assert!((freq - 0.8).abs() < 4.0 * (0.16 / trials as f64).sqrt(), "{freq}");
    }

    #[test]
    fn repeated_point_terminates_after_cover() {
        let src = source(vec![vec![1.0, -2.0]; 6]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = exact_adaptive_sample(&src, 1.0, 3, 4, &mut rng).unwrap();
        assert!(s.members().len() <= 3);
        let x = src.points().unwrap().clone();
        assert_eq!(err_p(&x, &s, 1.0).unwrap(), 0.0);
        // the second pass discovers the cover and stops the loop
        assert_eq!(src.passes().selection, 2);
    }

    #[test]
    fn round_one_frequencies_match_exact_distribution() {
        let rows = vec![
            vec![1.0, 0.0, 0.5],
            vec![0.0, 2.0, -1.0],
            vec![0.3, 0.3, 0.3],
            vec![-1.0, 1.0, 0.0],
            vec![2.0, 2.0, 1.0],
            vec![0.0, 0.0, 0.1],
        ];
        let x = PointSet::new(rows.clone()).unwrap();
        let exact = DistributionTable::adaptive(&x, &SubsetBasis::empty(3), 1.5).unwrap();
        let src = source(rows);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = reservoir_draw_iid(&src, |pt| pow_p(norm(pt), 1.5), 100_000, &mut rng).unwrap();
        let mut counts = [0usize; 6];
        for d in &draws {
            counts[d.index] += 1;
        }
        let empirical = DistributionTable::from_counts(&counts).unwrap();
        assert!(tv_distance(&empirical, &exact).unwrap() <= 0.02);
    }

    #[test]
    fn batch_shares_passes_and_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..25)
            .map(|i| {
                let f = i as f64;
                vec![f.cos(), f.sin(), (0.3 * f).cos(), 1.0]
            })
            .collect();
        let a = source(rows.clone());
        let b = source(rows);
        let ra = exact_adaptive_sample_batch(&a, 2.0, 2, 3, 5, 11).unwrap();
        let rb = exact_adaptive_sample_batch(&b, 2.0, 2, 3, 5, 11).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.passes().selection, 3);
        for s in &ra {
            assert!(s.members().len() <= 6);
        }
    }

    #[test]
    fn squared_length_examples() {
        let src = source(vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = squared_length_sample(&src, 2.0, 100_000, &mut rng).unwrap();
        let ones = s.members().iter().filter(|&&i| i == 1).count() as f64 / 100_000.0;
        assert!((ones - 0.8).abs() < 0.01);
        assert_eq!(src.passes().selection, 1);

        let three = source(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 1.0]]);
        let s = squared_length_sample(&three, 2.0, 5, &mut rng).unwrap();
        assert_eq!(s.members().len(), 5);
        assert!(s.rank() <= 3);

        let zeros = source(vec![vec![0.0, 0.0]; 3]);
        assert!(squared_length_sample(&zeros, 2.0, 2, &mut rng).is_err());
    }
}
