//! Best-of-R experiment orchestration and machine-readable reports.
//!
//! All repetitions share one selection pass (one per round for the exact
//! baseline); their candidate subsets are then scored together in a single
//! evaluation pass and the one with the smallest `err_p` is kept.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::baselines::exact_adaptive_sample_batch;
use crate::error::{Error, Result};
use crate::geometry::{err_p, pow_p, PointSet, SubsetBasis};
use crate::mcmc::{one_pass_adaptive_sample, theorem_params, SamplerConfig, WalkLengthReport};
use crate::oracles::{brute_force_candidate_err, svd_optimal_err2};
use crate::proposal::reservoir_draw_iid;
use crate::rng::{stream_rng, LENGTH_STREAM};
use crate::stream::{open_csv, CsvOptions, DatasetSource, PassCounts, PassPurpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    McmcOnePass,
    ExactAdaptive,
    SquaredLength,
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcmc-one-pass" | "mcmc" => Ok(Algorithm::McmcOnePass),
            "exact-adaptive" | "exact" => Ok(Algorithm::ExactAdaptive),
            "squared-length" => Ok(Algorithm::SquaredLength),
            other => Err(Error::param(format!(
                "unknown algorithm {other:?} (expected mcmc-one-pass, exact-adaptive or squared-length)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// Exact optimum for `p = 2`.
    Svd,
    /// Best span of `k` data points; an upper bound on the optimum for any `p`.
    Bruteforce,
    None,
}

impl FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svd" => Ok(OracleKind::Svd),
            "bruteforce" => Ok(OracleKind::Bruteforce),
            "none" => Ok(OracleKind::None),
            other => Err(Error::param(format!(
                "unknown oracle {other:?} (expected svd, bruteforce or none)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::param(format!("unknown report format {other:?}"))),
        }
    }
}

/// Raw parameter choices before they are turned into a [`SamplerConfig`].
///
/// With `delta` set, the accuracy-driven parameters are derived first and
/// any explicit `l`, `m` or `repetitions` then override them. Without it,
/// `t` and `m` are required, `l` defaults to `k` and `repetitions` to 1.
#[derive(Debug, Clone, Default)]
pub struct ParamRequest {
    pub k: usize,
    pub p: f64,
    pub delta: Option<f64>,
    pub t: Option<usize>,
    pub l: Option<usize>,
    pub m: Option<usize>,
    pub repetitions: Option<usize>,
    pub seed: u64,
}

impl ParamRequest {
    pub fn resolve(&self) -> Result<SamplerConfig> {
        let mut config = match self.delta {
            Some(delta) => theorem_params(self.k, self.p, delta, self.t)?,
            None => {
                let t = self
                    .t
                    .ok_or_else(|| Error::param("either --delta or --t must be given"))?;
                let m = self
                    .m
                    .ok_or_else(|| Error::param("either --delta or --m must be given"))?;
                SamplerConfig::new(self.k, self.p, t, self.k, m, 1, self.seed)?
            }
        };
        if let Some(l) = self.l {
            config.l = l;
        }
        if let Some(m) = self.m {
            config.m = m;
        }
        if let Some(r) = self.repetitions {
            config.repetitions = r;
        }
        if let Some(acc) = config.accuracy.as_mut() {
            // keep epsilon2 tied to the t and l actually used
            acc.epsilon2 = acc.epsilon1 / (config.t as f64 * config.l.max(1) as f64);
        }
        config.seed = self.seed;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub input: PathBuf,
    pub has_header: bool,
    pub algorithm: Algorithm,
    pub config: SamplerConfig,
    pub oracle: OracleKind,
}

/// Errors of a subset, in `1/p`-power units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvaluationRecord {
    /// `err_p(X, span S)^(1/p)`
    pub err_root: f64,
    /// `err_p(X, {})^(1/p)`
    pub empty_err_root: f64,
    /// `err_root / empty_err_root` (1 when both vanish)
    pub normalized: f64,
    /// `err_2(X, V*)^(1/2)` when `p = 2`
    pub optimal_err_root: Option<f64>,
}

pub fn evaluate_subset(x: &PointSet, subset_indices: &[usize], p: f64, k: usize) -> Result<EvaluationRecord> {
    let basis = SubsetBasis::from_indices(x, subset_indices)?;
    let err = err_p(x, &basis, p)?;
    let empty = err_p(x, &SubsetBasis::empty(x.dim()), p)?;
    let optimal_err_root = if p == 2.0 {
        Some(svd_optimal_err2(x, k)?.sqrt())
    } else {
        None
    };
    Ok(EvaluationRecord {
        err_root: err.powf(1.0 / p),
        empty_err_root: empty.powf(1.0 / p),
        normalized: normalized(err, empty).powf(1.0 / p),
        optimal_err_root,
    })
}

/// `err / empty`, taken as 1 when the data are all zero.
fn normalized(err: f64, empty: f64) -> f64 {
    if empty > 0.0 {
        err / empty
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    pub kind: OracleKind,
    /// Optimal (svd) or best-candidate (bruteforce) error, `err_p`.
    pub reference_err: f64,
    pub reference_err_root: f64,
    /// `reference_err_root + delta * err_p(X, {})^(1/p)`, when `delta` is known.
    pub additive_bound_root: Option<f64>,
    pub bound_satisfied: Option<bool>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Timings {
    pub pass_phase_secs: f64,
    pub walk_phase_secs: f64,
    pub evaluation_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub input: Option<String>,
    pub n: usize,
    pub d: usize,
    pub config: SamplerConfig,
    pub seed: u64,
    /// `err_p(X, span S_r)` for every repetition `r`.
    pub per_repetition_err: Vec<f64>,
    pub selected_repetition: usize,
    pub selected_indices: Vec<usize>,
    pub subset_rank: usize,
    pub final_err: f64,
    pub final_err_root: f64,
    pub empty_err: f64,
    pub empty_err_root: f64,
    /// `final_err_root / empty_err_root`
    pub normalized_err_root: f64,
    pub exact_cover: bool,
    pub oracle: Option<OracleSummary>,
    pub walk_length: Option<WalkLengthReport>,
    pub passes: PassCounts,
    pub timings: Timings,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))
    }

    /// Header line plus one row of the scalar fields.
    pub fn to_csv(&self) -> String {
        let alg = serde_json::to_value(self.algorithm)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let oracle_kind = self
            .oracle
            .as_ref()
            .and_then(|o| serde_json::to_value(o.kind).ok())
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_else(|| "none".into());
        let fields: [(&str, String); 25] = [
            ("algorithm", alg),
            ("n", self.n.to_string()),
            ("d", self.d.to_string()),
            ("k", self.config.k.to_string()),
            ("p", self.config.p.to_string()),
            ("t", self.config.t.to_string()),
            ("l", self.config.l.to_string()),
            ("m", self.config.m.to_string()),
            ("repetitions", self.config.repetitions.to_string()),
            ("seed", self.seed.to_string()),
            ("selected_repetition", self.selected_repetition.to_string()),
            ("subset_size", self.selected_indices.len().to_string()),
            ("subset_rank", self.subset_rank.to_string()),
            ("final_err_root", self.final_err_root.to_string()),
            ("empty_err_root", self.empty_err_root.to_string()),
            ("normalized_err_root", self.normalized_err_root.to_string()),
            ("exact_cover", self.exact_cover.to_string()),
            ("oracle", oracle_kind),
            ("oracle_err_root", opt(self.oracle.as_ref().map(|o| o.reference_err_root))),
            ("additive_bound_root", opt(self.oracle.as_ref().and_then(|o| o.additive_bound_root))),
            (
                "bound_satisfied",
                self.oracle
                    .as_ref()
                    .and_then(|o| o.bound_satisfied)
                    .map(|b| b.to_string())
                    .unwrap_or_default(),
            ),
            ("selection_passes", self.passes.selection.to_string()),
            ("evaluation_passes", self.passes.evaluation.to_string()),
            ("pass_phase_secs", self.timings.pass_phase_secs.to_string()),
            ("walk_phase_secs", self.timings.walk_phase_secs.to_string()),
        ];
        let mut out = String::new();
        let header: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
        let values: Vec<&str> = fields.iter().map(|(_, v)| v.as_str()).collect();
        let _ = writeln!(out, "{}", header.join(","));
        let _ = writeln!(out, "{}", values.join(","));
        out
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Json => self.to_json().map(|mut s| {
                s.push('\n');
                s
            }),
            ReportFormat::Csv => Ok(self.to_csv()),
        }
    }
}

/// Loads the input CSV and runs [`run_on_source`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunReport> {
    let source = open_csv(
        &spec.input,
        &CsvOptions {
            has_header: spec.has_header,
        },
    )?;
    run_on_source(&source, spec.algorithm, &spec.config, spec.oracle)
}

/// Selects `R` candidate subsets with `algorithm`, scores them in one shared
/// evaluation pass and reports the best.
///
/// Oracle values are computed from the materialized dataset; for in-memory
/// sources this does not count as a pass of the algorithm.
pub fn run_on_source(
    source: &DatasetSource,
    algorithm: Algorithm,
    config: &SamplerConfig,
    oracle: OracleKind,
) -> Result<RunReport> {
    config.validate()?;
    if config.k > source.dim() {
        return Err(Error::param(format!(
            "k = {} exceeds the data dimension {}",
            config.k,
            source.dim()
        )));
    }
    // validate oracle applicability before spending any pass
    if oracle == OracleKind::Svd && config.p != 2.0 {
        return Err(Error::param("the svd oracle is exact only for p = 2"));
    }

    let (subsets, pass_time, walk_time) = select(source, algorithm, config)?;

    let started = Instant::now();
    let dim = source.dim();
    let empty = SubsetBasis::empty(dim);
    let mut errs = vec![0.0; subsets.len()];
    let mut empty_err = 0.0;
    source.iterate_once(PassPurpose::Evaluation, |_, pt| {
        empty_err += pow_p(empty.dist_unchecked(pt), config.p);
        for (e, s) in errs.iter_mut().zip(&subsets) {
            *e += pow_p(s.dist_unchecked(pt), config.p);
        }
        Ok(())
    })?;
    let evaluation_time = started.elapsed();

    // first minimum wins ties
    let selected = errs
        .iter()
        .enumerate()
        .fold(0, |best, (i, e)| if *e < errs[best] { i } else { best });
    let best = &subsets[selected];
    let final_err = errs[selected];
    let root = |v: f64| v.powf(1.0 / config.p);

    let passes = source.passes();
    let oracle_summary = match oracle {
        OracleKind::None => None,
        kind => {
            let owned;
            let points: &PointSet = match source.points() {
                Some(p) => p,
                None => {
                    owned = source.collect()?;
                    &owned
                }
            };
            let reference_err = match kind {
                OracleKind::Svd => svd_optimal_err2(points, config.k)?,
                _ => brute_force_candidate_err(points, config.k, config.p)?,
            };
            let additive_bound_root = config
                .accuracy
                .map(|acc| root(reference_err) + acc.delta * root(empty_err));
            Some(OracleSummary {
                kind,
                reference_err,
                reference_err_root: root(reference_err),
                additive_bound_root,
                bound_satisfied: additive_bound_root.map(|b| root(final_err) <= b),
            })
        }
    };

    Ok(RunReport {
        algorithm,
        input: source.path().map(|p| p.display().to_string()),
        n: source.declared_len().unwrap_or(0),
        d: dim,
        config: config.clone(),
        seed: config.seed,
        selected_repetition: selected,
        selected_indices: best.members().to_vec(),
        subset_rank: best.rank(),
        final_err,
        final_err_root: root(final_err),
        empty_err,
        empty_err_root: root(empty_err),
        normalized_err_root: root(normalized(final_err, empty_err)),
        exact_cover: final_err == 0.0,
        per_repetition_err: errs,
        oracle: oracle_summary,
        walk_length: config.walk_length_report(),
        passes,
        timings: Timings {
            pass_phase_secs: pass_time.as_secs_f64(),
            walk_phase_secs: walk_time.as_secs_f64(),
            evaluation_secs: evaluation_time.as_secs_f64(),
        },
    })
}

fn select(
    source: &DatasetSource,
    algorithm: Algorithm,
    config: &SamplerConfig,
) -> Result<(Vec<SubsetBasis>, Duration, Duration)> {
    match algorithm {
        Algorithm::McmcOnePass => {
            let out = one_pass_adaptive_sample(source, config)?;
            Ok((out.subsets, out.pass_time, out.walk_time))
        }
        Algorithm::ExactAdaptive => {
            let started = Instant::now();
            let subsets = exact_adaptive_sample_batch(
                source,
                config.p,
                config.t,
                config.l,
                config.repetitions,
                config.seed,
            )?;
            Ok((subsets, started.elapsed(), Duration::ZERO))
        }
        Algorithm::SquaredLength => {
            let started = Instant::now();
            let per_rep = config.t * config.l.max(1);
            let mut rng = stream_rng(config.seed, &[LENGTH_STREAM]);
            let draws = reservoir_draw_iid(
                source,
                |x| pow_p(crate::geometry::norm(x), config.p),
                per_rep * config.repetitions,
                &mut rng,
            )?;
            let subsets = draws
                .chunks(per_rep)
                .map(|chunk| {
                    let mut s = SubsetBasis::empty(source.dim());
                    for d in chunk {
                        s.push(d.index, &d.point)?;
                    }
                    Ok(s)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((subsets, started.elapsed(), Duration::ZERO))
        }
    }
}
