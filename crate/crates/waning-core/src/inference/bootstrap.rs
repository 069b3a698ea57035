//! Seeded nonparametric percentile bootstrap for individual-level data.
//!
//! Resample `i` draws from a ChaCha stream determined only by `(seed, i)`,
//! so output is identical for any execution order or thread count. Failed
//! resamples are dropped and counted, never imputed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{bounds_from_incidences, incidence_row};
use crate::error::{Error, Result};
use crate::hazard::{cumulative_incidence, fit_cox, fit_logistic_hazards};
use crate::model::{
    BootstrapMeta, Cohort, CovariateProfile, EstimationMethod, IntervalSpec, KBackend,
    KBoundRow, KBoundsEstimate, PointCi, WaningEstimate,
};

use super::CiPolicy;

/// Resample count and seed for the percentile bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapConfig {
    resamples: usize,
    seed: u64,
}

impl BootstrapConfig {
    pub const DEFAULT_RESAMPLES: usize = 500;

    pub fn new(resamples: usize, seed: u64) -> Result<BootstrapConfig> {
        if resamples < 2 {
            return Err(Error::InvalidConfig(format!(
                "at least 2 bootstrap resamples required, got {resamples}"
            )));
        }
        Ok(BootstrapConfig { resamples, seed })
    }

    pub fn resamples(self) -> usize {
        self.resamples
    }

    pub fn seed(self) -> u64 {
        self.seed
    }
}

impl Default for BootstrapConfig {
    fn default() -> BootstrapConfig {
        BootstrapConfig { resamples: BootstrapConfig::DEFAULT_RESAMPLES, seed: 0 }
    }
}

/// Individual-data estimation backend for the bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndividualEstimator {
    /// Discrete-time logistic hazards per interval.
    Logistic,
    /// Per-arm Cox proportional hazards with a baseline cumulative hazard.
    Cox,
}

impl IndividualEstimator {
    pub fn method(self) -> EstimationMethod {
        match self {
            IndividualEstimator::Logistic => EstimationMethod::LogisticBootstrap,
            IndividualEstimator::Cox => EstimationMethod::CoxBootstrap,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IndividualEstimator::Logistic => "logistic",
            IndividualEstimator::Cox => "cox",
        }
    }
}

/// Nearest-rank percentile: the `ceil(q n)`-th smallest sample, with the
/// rank clamped to `[1, n]`. Samples are ordered by the IEEE total order,
/// so infinite draws participate as extremes.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("percentile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidConfig(format!("quantile level q={q} outside [0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Cumulative incidence through each interval, per arm, at a profile.
fn incidence_paths(
    cohort: &Cohort,
    spec: &IntervalSpec,
    estimator: IndividualEstimator,
    profile: &CovariateProfile,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k_max = spec.k_max();
    let mut y0 = Vec::with_capacity(k_max);
    let mut y1 = Vec::with_capacity(k_max);
    match estimator {
        IndividualEstimator::Logistic => {
            let model = fit_logistic_hazards(cohort, spec)?;
            let hazards = model.interval_hazards(profile)?;
            let mut s0 = 1.0;
            let mut s1 = 1.0;
            for h in &hazards {
                s0 *= 1.0 - h[0];
                s1 *= 1.0 - h[1];
                y0.push(1.0 - s0);
                y1.push(1.0 - s1);
            }
        }
        IndividualEstimator::Cox => {
            let horizon = spec
                .end_day(k_max)
                .ok_or_else(|| Error::InvalidIntervalSpec("empty interval spec".into()))?;
            let fit = fit_cox(cohort, f64::from(horizon))?;
            for k in 1..=k_max {
                y0.push(cumulative_incidence(&fit, k, 0, profile, spec)?);
                y1.push(cumulative_incidence(&fit, k, 1, profile, spec)?);
            }
        }
    }
    Ok((y0, y1))
}

fn two_interval_estimate(
    cohort: &Cohort,
    spec: &IntervalSpec,
    estimator: IndividualEstimator,
    profile: &CovariateProfile,
) -> Result<WaningEstimate> {
    if spec.k_max() < 2 {
        return Err(Error::InvalidIntervalSpec(format!(
            "two intervals required, got K={}",
            spec.k_max()
        )));
    }
    let (y0, y1) = incidence_paths(cohort, spec, estimator, profile)?;
    bounds_from_incidences([[y0[0], y1[0]], [y0[1], y1[1]]], estimator.method())
}

fn resample(cohort: &Cohort, seed: u64, index: u64) -> Cohort {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = cohort.records.len();
    let records = (0..n).map(|_| cohort.records[rng.gen_range(0..n)].clone()).collect();
    Cohort { records, schema: cohort.schema.clone() }
}

struct CorePoints {
    ve1: f64,
    ve2_obs: f64,
    l2: f64,
    u2: f64,
    l_psi: f64,
    u_psi: f64,
    psi_obs: Option<f64>,
}

fn core_points(est: &WaningEstimate, require_psi: bool) -> Option<CorePoints> {
    let points = CorePoints {
        ve1: est.ve1.point,
        ve2_obs: est.ve2_obs.point,
        l2: est.l2.point,
        u2: est.u2.point,
        l_psi: est.l_psi.point,
        u_psi: est.u_psi.point,
        psi_obs: est.psi_obs.as_ref().map(|c| c.point),
    };
    let finite_or_inf = [points.ve1, points.ve2_obs, points.l2, points.u2, points.l_psi, points.u_psi]
        .iter()
        .chain(points.psi_obs.iter())
        .all(|v| !v.is_nan());
    if !finite_or_inf || (require_psi && points.psi_obs.is_none()) {
        return None;
    }
    Some(points)
}

/// Percentile-bootstrap confidence intervals for the two-interval estimate
/// at a covariate profile. The point estimate comes from the full cohort;
/// each of `config.resamples()` resamples redraws individuals with
/// replacement and re-runs the chosen estimator end to end.
pub fn bootstrap_cis(
    cohort: &Cohort,
    spec: &IntervalSpec,
    estimator: IndividualEstimator,
    profile: &CovariateProfile,
    config: BootstrapConfig,
    policy: CiPolicy,
) -> Result<WaningEstimate> {
    let mut full = two_interval_estimate(cohort, spec, estimator, profile)?;
    let require_psi = full.psi_obs.is_some();
    let total = config.resamples();
    let draws: Vec<Option<CorePoints>> = (0..total as u64)
        .into_par_iter()
        .map(|i| {
            let redrawn = resample(cohort, config.seed(), i);
            two_interval_estimate(&redrawn, spec, estimator, profile)
                .ok()
                .and_then(|est| core_points(&est, require_psi))
        })
        .collect();
    let kept: Vec<&CorePoints> = draws.iter().flatten().collect();
    let failed = total - kept.len();
    if failed * 2 > total {
        return Err(Error::TooManyFailedResamples { failed, total });
    }

    let alpha = policy.alpha();
    let collect = |f: fn(&CorePoints) -> f64| kept.iter().map(|p| f(p)).collect::<Vec<f64>>();
    let two_sided = |point: f64, samples: &[f64]| -> Result<PointCi> {
        Ok(PointCi {
            point,
            lower: Some(percentile(samples, alpha / 2.0)?),
            upper: Some(percentile(samples, 1.0 - alpha / 2.0)?),
        })
    };
    full.ve1 = two_sided(full.ve1.point, &collect(|p| p.ve1))?;
    full.ve2_obs = two_sided(full.ve2_obs.point, &collect(|p| p.ve2_obs))?;
    full.l2 = PointCi {
        point: full.l2.point,
        lower: Some(percentile(&collect(|p| p.l2), alpha)?),
        upper: None,
    };
    full.u2 = PointCi {
        point: full.u2.point,
        lower: None,
        upper: Some(percentile(&collect(|p| p.u2), 1.0 - alpha)?),
    };
    full.l_psi = PointCi {
        point: full.l_psi.point,
        lower: Some(percentile(&collect(|p| p.l_psi), alpha)?),
        upper: None,
    };
    full.u_psi = PointCi {
        point: full.u_psi.point,
        lower: None,
        upper: Some(percentile(&collect(|p| p.u_psi), 1.0 - alpha)?),
    };
    if let Some(psi) = full.psi_obs.take() {
        let samples: Vec<f64> =
            kept.iter().map(|p| p.psi_obs.expect("psi required in kept draws")).collect();
        full.psi_obs = Some(two_sided(psi.point, &samples)?);
    }
    full.alpha = Some(alpha);
    full.bootstrap = Some(BootstrapMeta { resamples: total, used: kept.len(), failed, seed: config.seed() });
    Ok(full)
}

/// Percentile-bootstrap intervals for the per-interval bounds over all
/// `K >= 2` intervals. A resample contributes only if every interval's
/// contrast is computable, so all rows share one resample set.
pub fn bootstrap_k_cis(
    cohort: &Cohort,
    spec: &IntervalSpec,
    estimator: IndividualEstimator,
    profile: &CovariateProfile,
    config: BootstrapConfig,
    policy: CiPolicy,
) -> Result<KBoundsEstimate> {
    let k_max = spec.k_max();
    if k_max < 2 {
        return Err(Error::InvalidIntervalSpec(format!("K >= 2 required, got K={k_max}")));
    }
    let (y0, y1) = incidence_paths(cohort, spec, estimator, profile)?;
    let mut rows: Vec<KBoundRow> = (2..=k_max)
        .map(|k| match incidence_row(k, y0[k - 2], y0[k - 1], y1[k - 2], y1[k - 1]) {
            Ok(row) => row,
            Err(e) => KBoundRow { k, l: None, u: None, ve_obs: None, error: Some(e.to_string()) },
        })
        .collect();

    let total = config.resamples();
    let draws: Vec<Option<Vec<[f64; 3]>>> = (0..total as u64)
        .into_par_iter()
        .map(|i| {
            let redrawn = resample(cohort, config.seed(), i);
            let (y0, y1) = incidence_paths(&redrawn, spec, estimator, profile).ok()?;
            let mut per_k = Vec::with_capacity(k_max - 1);
            for k in 2..=k_max {
                let row = incidence_row(k, y0[k - 2], y0[k - 1], y1[k - 2], y1[k - 1]).ok()?;
                let l = row.l.expect("valid row").point;
                let u = row.u.expect("valid row").point;
                let ve = row.ve_obs.expect("valid row").point;
                if l.is_nan() || u.is_nan() || ve.is_nan() {
                    return None;
                }
                per_k.push([l, u, ve]);
            }
            Some(per_k)
        })
        .collect();
    let kept: Vec<&Vec<[f64; 3]>> = draws.iter().flatten().collect();
    let failed = total - kept.len();
    if failed * 2 > total {
        return Err(Error::TooManyFailedResamples { failed, total });
    }

    let alpha = policy.alpha();
    for (idx, row) in rows.iter_mut().enumerate() {
        if row.error.is_some() {
            continue;
        }
        let column = |j: usize| kept.iter().map(|v| v[idx][j]).collect::<Vec<f64>>();
        row.l = Some(PointCi {
            point: row.l.as_ref().expect("valid row").point,
            lower: Some(percentile(&column(0), alpha)?),
            upper: None,
        });
        row.u = Some(PointCi {
            point: row.u.as_ref().expect("valid row").point,
            lower: None,
            upper: Some(percentile(&column(1), 1.0 - alpha)?),
        });
        let ve_samples = column(2);
        row.ve_obs = Some(PointCi {
            point: row.ve_obs.as_ref().expect("valid row").point,
            lower: Some(percentile(&ve_samples, alpha / 2.0)?),
            upper: Some(percentile(&ve_samples, 1.0 - alpha / 2.0)?),
        });
    }

    Ok(KBoundsEstimate {
        rows,
        backend: KBackend::ExactProduct,
        alpha: Some(alpha),
        method: estimator.method(),
        stratum: None,
        warnings: Vec::new(),
        bootstrap: Some(BootstrapMeta { resamples: total, used: kept.len(), failed, seed: config.seed() }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IndividualRecord;
    use approx::assert_relative_eq;

    fn record(arm: u8, i: usize, time: f64, event: u8) -> IndividualRecord {
        IndividualRecord {
            id: format!("{arm}-{i}"),
            arm,
            covariates: vec![],
            time_days: time,
            event,
        }
    }

    /// Two 30-day intervals; events and censoring spread across both arms
    /// so every resample is overwhelmingly likely to stay estimable.
    fn synthetic_cohort(n_per_arm: usize) -> Cohort {
        let mut records = Vec::new();
        for arm in [0u8, 1u8] {
            for i in 0..n_per_arm {
                let (time, event) = match i % 10 {
                    0 => (((i * 7) % 29 + 1) as f64, 1),
                    1 if arm == 0 => (((i * 13) % 29 + 1) as f64, 1),
                    2 => ((31 + (i * 5) % 29) as f64, 1),
                    3 if arm == 0 => ((31 + (i * 3) % 29) as f64, 1),
                    4 => ((1 + (i * 11) % 55) as f64, 0),
                    _ => (60.0, 0),
                };
                records.push(record(arm, i, time, event));
            }
        }
        Cohort { records, schema: vec![] }
    }

    fn two_interval_spec() -> IntervalSpec {
        IntervalSpec::equal_intervals(2, 30)
    }

    #[test]
    fn percentile_is_a_nearest_rank_order_statistic() {
        let samples = [3.0, 1.0, 2.0];
        assert_eq!(percentile(&samples, 0.5).unwrap(), 2.0);
        assert_eq!(percentile(&samples, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&samples, 1.0).unwrap(), 3.0);
        assert_eq!(percentile(&samples, 0.34).unwrap(), 2.0);
        assert_eq!(percentile(&samples, 1.0 / 3.0).unwrap(), 1.0);
        let with_inf = [1.0, f64::INFINITY, 0.5];
        assert_eq!(percentile(&with_inf, 1.0).unwrap(), f64::INFINITY);
        assert!(percentile(&[], 0.5).is_err());
        assert!(percentile(&samples, 1.5).is_err());
    }

    #[test]
    fn constant_resample_distribution_has_zero_width() {
        let samples = vec![0.7357; 400];
        for q in [0.025, 0.05, 0.5, 0.95, 0.975] {
            assert_eq!(percentile(&samples, q).unwrap(), 0.7357);
        }
    }

    #[test]
    fn fixed_seed_bootstrap_is_reproducible() {
        let cohort = synthetic_cohort(120);
        let spec = two_interval_spec();
        let config = BootstrapConfig::new(24, 42).unwrap();
        let policy = CiPolicy::default();
        let profile = CovariateProfile::new();
        let a = bootstrap_cis(&cohort, &spec, IndividualEstimator::Logistic, &profile, config, policy)
            .unwrap();
        let b = bootstrap_cis(&cohort, &spec, IndividualEstimator::Logistic, &profile, config, policy)
            .unwrap();
        assert_eq!(a, b);
        let meta = a.bootstrap.as_ref().unwrap();
        assert_eq!(meta.resamples, 24);
        assert_eq!(meta.used + meta.failed, 24);
        assert_eq!(meta.seed, 42);
    }

    #[test]
    fn logistic_bootstrap_attaches_one_sided_bound_intervals() {
        let cohort = synthetic_cohort(150);
        let spec = two_interval_spec();
        let config = BootstrapConfig::new(40, 7).unwrap();
        let est = bootstrap_cis(
            &cohort,
            &spec,
            IndividualEstimator::Logistic,
            &CovariateProfile::new(),
            config,
            CiPolicy::default(),
        )
        .unwrap();
        assert_eq!(est.method, EstimationMethod::LogisticBootstrap);
        assert!(est.ve1.lower.unwrap() <= est.ve1.upper.unwrap());
        assert!(est.l2.lower.is_some() && est.l2.upper.is_none());
        assert!(est.u2.upper.is_some() && est.u2.lower.is_none());
        assert!(est.l_psi.lower.is_some() && est.l_psi.upper.is_none());
        assert!(est.u_psi.upper.is_some() && est.u_psi.lower.is_none());
        assert!(est.l2.lower.unwrap() <= est.l2.point);
        assert!(est.u2.upper.unwrap() >= est.u2.point);
        let psi = est.psi_obs.as_ref().unwrap();
        assert!(psi.lower.unwrap() <= psi.upper.unwrap());
        assert_eq!(est.alpha, Some(0.05));
    }

    #[test]
    fn cox_bootstrap_runs_and_tags_the_method() {
        let cohort = synthetic_cohort(100);
        let spec = two_interval_spec();
        let config = BootstrapConfig::new(24, 11).unwrap();
        let est = bootstrap_cis(
            &cohort,
            &spec,
            IndividualEstimator::Cox,
            &CovariateProfile::new(),
            config,
            CiPolicy::default(),
        )
        .unwrap();
        assert_eq!(est.method, EstimationMethod::CoxBootstrap);
        assert!(est.ve1.lower.is_some() && est.ve1.upper.is_some());
        assert!(est.bootstrap.is_some());
    }

    #[test]
    fn k2_rows_match_the_two_interval_bootstrap() {
        let cohort = synthetic_cohort(150);
        let spec = two_interval_spec();
        let config = BootstrapConfig::new(30, 3).unwrap();
        let policy = CiPolicy::default();
        let profile = CovariateProfile::new();
        let est = bootstrap_cis(&cohort, &spec, IndividualEstimator::Logistic, &profile, config, policy)
            .unwrap();
        let kb = bootstrap_k_cis(&cohort, &spec, IndividualEstimator::Logistic, &profile, config, policy)
            .unwrap();
        assert_eq!(est.bootstrap.as_ref().unwrap().used, 30);
        assert_eq!(kb.bootstrap.as_ref().unwrap().used, 30);
        assert_eq!(kb.backend, KBackend::ExactProduct);
        let row = &kb.rows[0];
        assert_eq!(row.k, 2);
        let l = row.l.as_ref().unwrap();
        let u = row.u.as_ref().unwrap();
        let ve = row.ve_obs.as_ref().unwrap();
        assert_relative_eq!(l.point, est.l2.point, max_relative = 1e-12);
        assert_relative_eq!(l.lower.unwrap(), est.l2.lower.unwrap(), max_relative = 1e-12);
        assert_relative_eq!(u.upper.unwrap(), est.u2.upper.unwrap(), max_relative = 1e-12);
        assert_relative_eq!(ve.point, est.ve2_obs.point, max_relative = 1e-12);
        assert_relative_eq!(ve.lower.unwrap(), est.ve2_obs.lower.unwrap(), max_relative = 1e-12);
        assert_relative_eq!(ve.upper.unwrap(), est.ve2_obs.upper.unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn three_interval_bootstrap_covers_every_row() {
        let spec = IntervalSpec::equal_intervals(3, 30);
        let mut cohort = synthetic_cohort(150);
        for i in 0..150 {
            for arm in [0u8, 1u8] {
                let (time, event) = if i % 10 == 6 || (i % 10 == 7 && arm == 0) {
                    ((61 + (i * 7) % 29) as f64, 1)
                } else {
                    (90.0, 0)
                };
                cohort.records.push(record(arm, 1000 + i, time, event));
            }
        }
        let config = BootstrapConfig::new(24, 5).unwrap();
        let kb = bootstrap_k_cis(
            &cohort,
            &spec,
            IndividualEstimator::Logistic,
            &CovariateProfile::new(),
            config,
            CiPolicy::default(),
        )
        .unwrap();
        assert_eq!(kb.rows.len(), 2);
        for row in &kb.rows {
            assert!(row.error.is_none(), "{:?}", row.error);
            assert!(row.l.as_ref().unwrap().lower.is_some());
            assert!(row.u.as_ref().unwrap().upper.is_some());
            let ve = row.ve_obs.as_ref().unwrap();
            assert!(ve.lower.unwrap() <= ve.upper.unwrap());
        }
    }

    #[test]
    fn mostly_failing_resamples_are_an_error() {
        // Six distinct subjects, all of which a resample must include to
        // stay estimable: nearly every resample fails.
        let records = vec![
            record(0, 0, 15.0, 1),
            record(0, 1, 45.0, 1),
            record(0, 2, 60.0, 0),
            record(1, 0, 15.0, 1),
            record(1, 1, 45.0, 1),
            record(1, 2, 60.0, 0),
        ];
        let cohort = Cohort { records, schema: vec![] };
        let spec = two_interval_spec();
        let err = bootstrap_cis(
            &cohort,
            &spec,
            IndividualEstimator::Logistic,
            &CovariateProfile::new(),
            BootstrapConfig::new(40, 7).unwrap(),
            CiPolicy::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::TooManyFailedResamples { .. }), "{err}");
    }

    #[test]
    fn resamples_depend_only_on_seed_and_index() {
        let cohort = synthetic_cohort(20);
        let a = resample(&cohort, 9, 4);
        let b = resample(&cohort, 9, 4);
        let c = resample(&cohort, 9, 5);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn config_rejects_degenerate_resample_counts() {
        assert!(BootstrapConfig::new(1, 0).is_err());
        assert!(BootstrapConfig::new(2, 0).is_ok());
        assert_eq!(BootstrapConfig::default().resamples(), 500);
    }
}
