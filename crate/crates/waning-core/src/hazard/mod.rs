//! Hazard and cumulative-incidence estimation over three backends:
//! summary person-time rates, per-interval logistic regression, and Cox
//! proportional hazards with a Breslow-type baseline.

mod cox;
mod logistic;

pub use cox::{
    cox_partial_log_likelihood, cumulative_incidence, fit_cox, fit_cox_with_ties, CoxArmFit,
    CoxFit, TieMethod,
};
pub use logistic::{
    fit_logistic_hazards, logistic_log_likelihood, LogisticFit, LogisticHazardModel,
};

use crate::error::{Error, Result};
use crate::model::{
    CumulativeHazards, HazardCell, RateCell, StratumHazards, SummaryTable,
};

/// Estimates per-subinterval rates `lambda = N/T` with variance
/// `lambda^2/N`, and per-interval cumulative hazards
/// `Lambda_k = sum_j lambda_kj * tau_kj` with variance
/// `sum_j var(lambda_kj) * tau_kj^2`, separately per stratum.
///
/// A cell with zero events keeps `lambda = 0` and an unavailable variance;
/// an interval inherits an unavailable variance from any such cell.
pub fn rate_hazards(table: &SummaryTable) -> Result<CumulativeHazards> {
    for cell in &table.cells {
        if cell.events > 0 && cell.person_time <= 0.0 {
            return Err(Error::ZeroPersonTime(cell.key()));
        }
    }
    table.ensure_valid()?;

    let mut hazards = CumulativeHazards { k_max: table.spec.k_max(), ..Default::default() };
    for stratum in table.strata() {
        let mut sh = StratumHazards::default();
        for interval in &table.spec.intervals {
            for arm in [0u8, 1u8] {
                let mut value = 0.0;
                let mut variance = Some(0.0);
                for sub in &interval.subintervals {
                    let cell = table
                        .cells
                        .iter()
                        .find(|c| {
                            c.k == interval.k
                                && c.j == sub.j
                                && c.arm == arm
                                && c.stratum == stratum
                        })
                        .expect("validated table covers every cell");
                    let tau = sub.duration_days();
                    let lambda = if cell.events == 0 {
                        0.0
                    } else {
                        cell.events as f64 / cell.person_time
                    };
                    let var_lambda = (cell.events > 0)
                        .then(|| lambda * lambda / cell.events as f64);
                    value += lambda * tau;
                    variance = match (variance, var_lambda) {
                        (Some(acc), Some(v)) => Some(acc + v * tau * tau),
                        _ => None,
                    };
                    sh.rates.push(RateCell {
                        k: interval.k,
                        j: sub.j,
                        arm,
                        lambda,
                        variance: var_lambda,
                        duration_days: tau,
                        events: cell.events,
                        person_time: cell.person_time,
                    });
                }
                sh.intervals.push(HazardCell { k: interval.k, arm, value, variance });
            }
        }
        hazards.strata.insert(stratum, sh);
    }
    Ok(hazards)
}

/// Exact discrete product-form cumulative incidence through interval `k`:
/// one minus the product of `(1 - h)` over every hazard step of intervals
/// `1..=k`. `per_interval_hazards[i]` holds interval `i+1`'s step hazards.
pub fn product_cumulative_incidence(per_interval_hazards: &[Vec<f64>], k: usize) -> Result<f64> {
    if k == 0 || k > per_interval_hazards.len() {
        return Err(Error::InvalidConfig(format!(
            "interval k={k} outside 1..={}",
            per_interval_hazards.len()
        )));
    }
    let mut survival = 1.0;
    for steps in &per_interval_hazards[..k] {
        for &h in steps {
            if !(0.0..=1.0).contains(&h) {
                return Err(Error::HazardOutOfRange(format!(
                    "step hazard {h} outside [0, 1]"
                )));
            }
            survival *= 1.0 - h;
        }
    }
    Ok(1.0 - survival)
}

/// Expands one arm's piecewise-constant rates to day-granular discrete
/// hazards (`lambda * 1 day` per day), grouped per interval, for the exact
/// product-form backend.
pub fn day_expanded_hazards(sh: &StratumHazards, arm: u8) -> Result<Vec<Vec<f64>>> {
    let k_max = sh.intervals.iter().map(|c| c.k).max().unwrap_or(0);
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut steps = Vec::new();
        for rate in sh.rates.iter().filter(|r| r.k == k && r.arm == arm) {
            if !(0.0..=1.0).contains(&rate.lambda) {
                return Err(Error::HazardOutOfRange(format!(
                    "daily hazard {} in (k={}, j={}, arm={arm}) outside [0, 1]",
                    rate.lambda, rate.k, rate.j
                )));
            }
            let days = rate.duration_days.round() as usize;
            steps.extend(std::iter::repeat(rate.lambda).take(days));
        }
        out.push(steps);
    }
    Ok(out)
}

/// Solves `a x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. Solver-internal; dimensions are the handful of model
/// coefficients.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite pivot")
        })?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for c in row + 1..n {
            sum -= a[row][c] * x[c];
        }
        x[row] = sum / a[row][row];
    }
    Some(x)
}

pub(crate) struct NewtonOutcome {
    pub beta: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub gradient_sup: f64,
    /// Log-likelihood after each accepted step, starting at beta = 0.
    pub ll_path: Vec<f64>,
}

/// Maximizes a concave log-likelihood by Newton's method with step-halving,
/// starting from beta = 0. `eval` returns the log-likelihood, gradient, and
/// Fisher information at a point. Convergence is a gradient sup-norm below
/// 1e-8; any coefficient passing |beta| = 30 reports separation; 50
/// iterations or a failed halving ladder reports non-convergence.
pub(crate) fn newton_maximize(
    p: usize,
    mut eval: impl FnMut(&[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>),
    label: &str,
) -> Result<NewtonOutcome> {
    let mut beta = vec![0.0; p];
    let (mut ll, mut grad, mut info) = eval(&beta);
    let mut ll_path = vec![ll];
    let mut iterations = 0;
    loop {
        let gradient_sup = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gradient_sup < 1e-8 {
            return Ok(NewtonOutcome { beta, log_likelihood: ll, iterations, gradient_sup, ll_path });
        }
        if iterations >= 50 {
            return Err(Error::NonConvergence(format!(
                "{label}: no convergence in 50 iterations (gradient sup-norm {gradient_sup:.3e})"
            )));
        }
        iterations += 1;
        let step = solve_dense(info.clone(), grad.clone()).ok_or_else(|| {
            Error::NonConvergence(format!("{label}: singular information matrix"))
        })?;
        let mut scale = 1.0;
        let mut stepped = false;
        for _ in 0..=10 {
            let cand: Vec<f64> =
                beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let (cand_ll, cand_grad, cand_info) = eval(&cand);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * (1.0 + ll.abs()) {
                beta = cand;
                ll = cand_ll;
                grad = cand_grad;
                info = cand_info;
                ll_path.push(ll);
                stepped = true;
                break;
            }
            scale *= 0.5;
        }
        if !stepped {
            return Err(Error::NonConvergence(format!(
                "{label}: step-halving failed to raise the log-likelihood"
            )));
        }
        if let Some(b) = beta.iter().find(|b| b.abs() > 30.0) {
            return Err(Error::Separation(format!(
                "{label}: coefficient reached {b:.1}; data are separated"
            )));
        }
    }
}

/// Logistic function `1 / (1 + e^(-x))`.
pub(crate) fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
