//! Discrete-time hazard estimation: one logistic regression per interval,
//! `h_k(a, l) = expit(beta_0 + beta_1 a + beta' l)`, fit by Newton/IRLS.

use crate::error::{Error, Result};
use crate::model::{Cohort, CovariateColumn, CovariateProfile, DesignInfo, IntervalSpec};

use super::{expit, newton_maximize};

/// One interval's fitted logistic hazard model. Coefficient order is
/// intercept, arm, then the design columns.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub k: usize,
    pub beta: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Sup-norm of the score at the returned coefficients.
    pub gradient_sup: f64,
    /// Log-likelihood after each accepted Newton step.
    pub ll_path: Vec<f64>,
    /// Subjects at risk in the interval.
    pub risk_set: usize,
    /// Events in the interval.
    pub events: usize,
}

/// Per-interval logistic hazard fits for one cohort.
#[derive(Debug, Clone)]
pub struct LogisticHazardModel {
    pub fits: Vec<LogisticFit>,
    pub design: DesignInfo,
    pub schema: Vec<CovariateColumn>,
    pub k_max: usize,
}

impl LogisticHazardModel {
    fn fit(&self, k: usize) -> Result<&LogisticFit> {
        self.fits
            .iter()
            .find(|f| f.k == k)
            .ok_or_else(|| Error::InvalidConfig(format!("no fitted interval k={k}")))
    }

    /// Predicted hazard for interval `k`, arm `arm`, at pre-encoded design
    /// values. Always in (0, 1).
    pub fn hazard_encoded(&self, k: usize, arm: u8, encoded: &[f64]) -> Result<f64> {
        let fit = self.fit(k)?;
        let mut eta = fit.beta[0] + fit.beta[1] * f64::from(arm);
        for (b, v) in fit.beta[2..].iter().zip(encoded) {
            eta += b * v;
        }
        Ok(expit(eta))
    }

    /// Predicted hazard at a covariate profile.
    pub fn hazard(&self, k: usize, arm: u8, profile: &CovariateProfile) -> Result<f64> {
        let encoded = self.design.encode_profile(&self.schema, profile)?;
        self.hazard_encoded(k, arm, &encoded)
    }

    /// Per-interval `[placebo, vaccine]` hazards at a covariate profile.
    pub fn interval_hazards(&self, profile: &CovariateProfile) -> Result<Vec<[f64; 2]>> {
        let encoded = self.design.encode_profile(&self.schema, profile)?;
        (1..=self.k_max)
            .map(|k| {
                Ok([
                    self.hazard_encoded(k, 0, &encoded)?,
                    self.hazard_encoded(k, 1, &encoded)?,
                ])
            })
            .collect()
    }
}

/// Bernoulli log-likelihood and score for design rows `x` (already including
/// intercept and arm columns) and responses `y` in {0, 1}. Exposed so the
/// analytic gradient can be checked against finite differences.
pub fn logistic_log_likelihood(x: &[Vec<f64>], y: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let (ll, grad, _) = eval(x, y, beta);
    (ll, grad)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn eval(x: &[Vec<f64>], y: &[f64], beta: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let p = beta.len();
    let mut ll = 0.0;
    let mut grad = vec![0.0; p];
    let mut info = vec![vec![0.0; p]; p];
    for (xi, &yi) in x.iter().zip(y) {
        let eta: f64 = xi.iter().zip(beta).map(|(a, b)| a * b).sum();
        ll += yi * eta - softplus(eta);
        let mu = expit(eta);
        let w = mu * (1.0 - mu);
        for j in 0..p {
            grad[j] += (yi - mu) * xi[j];
            for l in j..p {
                info[j][l] += w * xi[j] * xi[l];
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

/// Fits one logistic hazard model per interval.
///
/// The interval-`k` risk set holds subjects observed through the whole
/// interval (time at or past its end) plus subjects whose event falls inside
/// it; subjects censored mid-interval are excluded from that interval. Each
/// arm's risk set must be nonempty and must contain both an event and a
/// non-event, otherwise the likelihood is monotone and the fit reports
/// separation.
pub fn fit_logistic_hazards(cohort: &Cohort, spec: &IntervalSpec) -> Result<LogisticHazardModel> {
    spec.ensure_valid()?;
    cohort.ensure_estimable()?;
    let design = DesignInfo::from_cohort(cohort);
    let encoded: Vec<Vec<f64>> = cohort
        .records
        .iter()
        .map(|r| design.encode_record(r))
        .collect::<Result<_>>()?;
    let p = 2 + design.width();

    let mut fits = Vec::new();
    for interval in &spec.intervals {
        let lo = f64::from(interval.start_day()) - 1.0;
        let hi = f64::from(interval.end_day());
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut at_risk = [0usize; 2];
        let mut events = [0usize; 2];
        for (rec, enc) in cohort.records.iter().zip(&encoded) {
            let t = rec.time_days;
            let event_here = rec.event == 1 && t > lo && t <= hi;
            if !(event_here || t >= hi) {
                continue;
            }
            let mut row = Vec::with_capacity(p);
            row.push(1.0);
            row.push(f64::from(rec.arm));
            row.extend_from_slice(enc);
            x.push(row);
            y.push(f64::from(u8::from(event_here)));
            at_risk[rec.arm as usize] += 1;
            events[rec.arm as usize] += usize::from(event_here);
        }
        for arm in [0usize, 1usize] {
            if at_risk[arm] == 0 {
                return Err(Error::EmptyRiskSet(format!(
                    "interval k={}: arm {arm} has an empty risk set",
                    interval.k
                )));
            }
            if events[arm] == 0 || events[arm] == at_risk[arm] {
                return Err(Error::Separation(format!(
                    "interval k={}: arm {arm} has {} events among {} at risk; \
                     the likelihood is monotone",
                    interval.k, events[arm], at_risk[arm]
                )));
            }
        }
        let label = format!("logistic fit, interval k={}", interval.k);
        let outcome = newton_maximize(p, |beta| eval(&x, &y, beta), &label)?;
        fits.push(LogisticFit {
            k: interval.k,
            beta: outcome.beta,
            log_likelihood: outcome.log_likelihood,
            iterations: outcome.iterations,
            gradient_sup: outcome.gradient_sup,
            ll_path: outcome.ll_path,
            risk_set: x.len(),
            events: events[0] + events[1],
        });
    }
    Ok(LogisticHazardModel { fits, design, schema: cohort.schema.clone(), k_max: spec.k_max() })
}
