//! Per-arm Cox proportional hazards `lambda(t | a, l) = lambda_0a(t) exp(beta_a' l)`
//! with Efron or Breslow tie handling and the Breslow step-function baseline
//! cumulative hazard.

use crate::error::{Error, Result};
use crate::model::{Cohort, CovariateColumn, CovariateProfile, DesignInfo, IntervalSpec};

use super::newton_maximize;

/// Tie handling for the partial likelihood. Efron is the default
/// throughout; Breslow exists for cross-checks against simpler oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieMethod {
    Efron,
    Breslow,
}

impl TieMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TieMethod::Efron => "efron",
            TieMethod::Breslow => "breslow",
        }
    }
}

/// One arm's fitted model.
#[derive(Debug, Clone)]
pub struct CoxArmFit {
    pub arm: u8,
    /// One coefficient per design column; empty with no covariates.
    pub beta: Vec<f64>,
    /// Right-continuous baseline cumulative hazard: ascending
    /// (event time, value) steps.
    pub baseline: Vec<(f64, f64)>,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Sup-norm of the score at the returned coefficients.
    pub gradient_sup: f64,
    pub events: usize,
    pub subjects: usize,
}

impl CoxArmFit {
    /// Baseline cumulative hazard at day `t`.
    pub fn baseline_at(&self, t: f64) -> f64 {
        let idx = self.baseline.partition_point(|&(time, _)| time <= t);
        if idx == 0 {
            0.0
        } else {
            self.baseline[idx - 1].1
        }
    }
}

/// Per-arm Cox fits sharing one covariate design.
#[derive(Debug, Clone)]
pub struct CoxFit {
    pub arms: [CoxArmFit; 2],
    pub ties: TieMethod,
    pub horizon_days: f64,
    pub design: DesignInfo,
    pub schema: Vec<CovariateColumn>,
}

impl CoxFit {
    /// Cumulative incidence `1 - exp(-Lambda_0a(t) exp(beta_a x))` at a day
    /// and pre-encoded design values.
    pub fn incidence_encoded(&self, day: f64, arm: u8, encoded: &[f64]) -> Result<f64> {
        if arm > 1 {
            return Err(Error::InvalidConfig(format!("arm {arm} outside {{0,1}}")));
        }
        if day > self.horizon_days {
            return Err(Error::HorizonExceeded(format!(
                "day {day} is past the fitted horizon, day {}",
                self.horizon_days
            )));
        }
        let fit = &self.arms[arm as usize];
        let eta: f64 = fit.beta.iter().zip(encoded).map(|(b, v)| b * v).sum();
        Ok(-(-fit.baseline_at(day) * eta.exp()).exp_m1())
    }
}

/// Cumulative incidence through the end of interval `k` for one arm at a
/// covariate profile.
pub fn cumulative_incidence(
    fit: &CoxFit,
    k: usize,
    arm: u8,
    profile: &CovariateProfile,
    spec: &IntervalSpec,
) -> Result<f64> {
    let end_day = spec.end_day(k).ok_or_else(|| {
        Error::InvalidConfig(format!("interval k={k} not in the interval spec"))
    })?;
    let day = f64::from(end_day);
    if day > fit.horizon_days {
        return Err(Error::HorizonExceeded(format!(
            "interval k={k} ends on day {day}, past the fitted horizon, day {}",
            fit.horizon_days
        )));
    }
    let encoded = fit.design.encode_profile(&fit.schema, profile)?;
    fit.incidence_encoded(day, arm, &encoded)
}

/// Fits a per-arm Cox model with Efron tie handling, censoring follow-up at
/// `horizon_days`.
pub fn fit_cox(cohort: &Cohort, horizon_days: f64) -> Result<CoxFit> {
    fit_cox_with_ties(cohort, horizon_days, TieMethod::Efron)
}

/// `fit_cox` with an explicit tie method.
pub fn fit_cox_with_ties(
    cohort: &Cohort,
    horizon_days: f64,
    ties: TieMethod,
) -> Result<CoxFit> {
    if !(horizon_days.is_finite() && horizon_days > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "horizon {horizon_days} must be a positive day count"
        )));
    }
    cohort.ensure_estimable()?;
    let design = DesignInfo::from_cohort(cohort);
    let arms = [
        fit_arm(cohort, &design, 0, horizon_days, ties)?,
        fit_arm(cohort, &design, 1, horizon_days, ties)?,
    ];
    Ok(CoxFit { arms, ties, horizon_days, design, schema: cohort.schema.clone() })
}

/// Partial log-likelihood of one arm's data at `beta`, exposed so the solver
/// can be checked against brute-force enumeration on small cohorts.
pub fn cox_partial_log_likelihood(
    times: &[f64],
    events: &[u8],
    covariates: &[Vec<f64>],
    beta: &[f64],
    ties: TieMethod,
) -> Result<f64> {
    if times.len() != events.len() || times.len() != covariates.len() {
        return Err(Error::InvalidConfig(
            "times, events, and covariates must have equal length".into(),
        ));
    }
    if covariates.iter().any(|x| x.len() != beta.len()) {
        return Err(Error::InvalidConfig(
            "covariate rows must match the coefficient width".into(),
        ));
    }
    let rows = times
        .iter()
        .zip(events)
        .zip(covariates)
        .map(|((&t, &d), x)| (t, d, x.clone()))
        .collect();
    let data = ArmData::sorted(rows, beta.len());
    let (ll, _, _) = eval(&data, beta, ties);
    Ok(ll)
}

/// One arm's rows ordered by descending time (ties broken by input order),
/// so a single sweep accumulates risk-set sums.
struct ArmData {
    times: Vec<f64>,
    events: Vec<u8>,
    x: Vec<Vec<f64>>,
    p: usize,
}

impl ArmData {
    fn sorted(rows: Vec<(f64, u8, Vec<f64>)>, p: usize) -> ArmData {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_unstable_by(|&a, &b| {
            rows[b].0.partial_cmp(&rows[a].0).expect("finite times").then(a.cmp(&b))
        });
        let mut data = ArmData {
            times: Vec::with_capacity(rows.len()),
            events: Vec::with_capacity(rows.len()),
            x: Vec::with_capacity(rows.len()),
            p,
        };
        for i in order {
            data.times.push(rows[i].0);
            data.events.push(rows[i].1);
            data.x.push(rows[i].2.clone());
        }
        data
    }

    fn eta(&self, i: usize, beta: &[f64]) -> f64 {
        self.x[i].iter().zip(beta).map(|(a, b)| a * b).sum()
    }
}

fn fit_arm(
    cohort: &Cohort,
    design: &DesignInfo,
    arm: u8,
    horizon_days: f64,
    ties: TieMethod,
) -> Result<CoxArmFit> {
    let mut rows = Vec::new();
    for rec in cohort.records.iter().filter(|r| r.arm == arm) {
        if !(rec.time_days.is_finite() && rec.time_days > 0.0) {
            return Err(Error::Schema(format!(
                "record {}: time {} is not a positive day count",
                rec.id, rec.time_days
            )));
        }
        let (t, d) = if rec.time_days > horizon_days {
            (horizon_days, 0u8)
        } else {
            (rec.time_days, rec.event)
        };
        rows.push((t, d, design.encode_record(rec)?));
    }
    let data = ArmData::sorted(rows, design.width());
    let events = data.events.iter().filter(|&&d| d == 1).count();
    if events == 0 {
        return Err(Error::NoEvents(format!(
            "arm {arm} has no events on or before day {horizon_days}"
        )));
    }
    let label = format!("cox fit, arm {arm}");
    let outcome = newton_maximize(data.p, |beta| eval(&data, beta, ties), &label)?;
    let baseline = baseline_steps(&data, &outcome.beta, ties);
    Ok(CoxArmFit {
        arm,
        beta: outcome.beta,
        baseline,
        log_likelihood: outcome.log_likelihood,
        iterations: outcome.iterations,
        gradient_sup: outcome.gradient_sup,
        events,
        subjects: data.times.len(),
    })
}

/// Partial log-likelihood, score, and information in one descending sweep.
fn eval(data: &ArmData, beta: &[f64], ties: TieMethod) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let p = beta.len();
    let n = data.times.len();
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![vec![0.0; p]; p];
    let mut ll = 0.0;
    let mut grad = vec![0.0; p];
    let mut info = vec![vec![0.0; p]; p];
    let mut i = 0;
    while i < n {
        let t = data.times[i];
        let start = i;
        while i < n && data.times[i] == t {
            let w = data.eta(i, beta).exp();
            s0 += w;
            for j in 0..p {
                s1[j] += w * data.x[i][j];
                for l in j..p {
                    s2[j][l] += w * data.x[i][j] * data.x[i][l];
                }
            }
            i += 1;
        }
        let tied: Vec<usize> = (start..i).filter(|&r| data.events[r] == 1).collect();
        if tied.is_empty() {
            continue;
        }
        let d = tied.len() as f64;
        let mut s0d = 0.0;
        let mut s1d = vec![0.0; p];
        let mut s2d = vec![vec![0.0; p]; p];
        for &r in &tied {
            let eta = data.eta(r, beta);
            let w = eta.exp();
            ll += eta;
            s0d += w;
            for j in 0..p {
                grad[j] += data.x[r][j];
                s1d[j] += w * data.x[r][j];
                for l in j..p {
                    s2d[j][l] += w * data.x[r][j] * data.x[r][l];
                }
            }
        }
        for ridx in 0..tied.len() {
            let f = match ties {
                TieMethod::Efron => ridx as f64 / d,
                TieMethod::Breslow => 0.0,
            };
            let denom = s0 - f * s0d;
            ll -= denom.ln();
            for j in 0..p {
                let uj = (s1[j] - f * s1d[j]) / denom;
                grad[j] -= uj;
                for l in j..p {
                    let ul = (s1[l] - f * s1d[l]) / denom;
                    info[j][l] += (s2[j][l] - f * s2d[j][l]) / denom - uj * ul;
                }
            }
        }
    }
    for j in 0..p {
        for l in 0..j {
            info[j][l] = info[l][j];
        }
    }
    (ll, grad, info)
}

/// Breslow baseline cumulative hazard steps at fitted coefficients; with
/// Efron ties each tied event time contributes `sum_r 1/(S0 - (r/d) S0D)`.
fn baseline_steps(data: &ArmData, beta: &[f64], ties: TieMethod) -> Vec<(f64, f64)> {
    let n = data.times.len();
    let mut steps = Vec::new();
    let mut s0 = 0.0;
    let mut i = 0;
    while i < n {
        let t = data.times[i];
        let start = i;
        while i < n && data.times[i] == t {
            s0 += data.eta(i, beta).exp();
            i += 1;
        }
        let tied: Vec<usize> = (start..i).filter(|&r| data.events[r] == 1).collect();
        if tied.is_empty() {
            continue;
        }
        let d = tied.len() as f64;
        let s0d: f64 = tied.iter().map(|&r| data.eta(r, beta).exp()).sum();
        let increment: f64 = match ties {
            TieMethod::Breslow => d / s0,
            TieMethod::Efron => {
                (0..tied.len()).map(|ridx| 1.0 / (s0 - ridx as f64 / d * s0d)).sum()
            }
        };
        steps.push((t, increment));
    }
    steps.reverse();
    let mut cumulative = 0.0;
    for step in &mut steps {
        cumulative += step.1;
        step.1 = cumulative;
    }
    steps
}
