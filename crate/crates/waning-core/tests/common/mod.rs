//! Brute-force oracles shared by the solver-check test targets. Everything
//! here recomputes quantities straight from definitions with nested loops,
//! sharing no code path with the implementation under test.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use waning_core::hazard::TieMethod;
use waning_core::model::{Cohort, CovariateColumn, CovariateKind, CovariateValue, IndividualRecord};

pub struct TinyArm {
    pub times: Vec<f64>,
    pub events: Vec<u8>,
    pub x: Vec<Vec<f64>>,
}

/// Partial log-likelihood from first principles: for every distinct event
/// time, the event terms minus the tie-adjusted log risk-set sums.
pub fn oracle_partial_ll(data: &TinyArm, beta: &[f64], ties: TieMethod) -> f64 {
    let n = data.times.len();
    let eta: Vec<f64> =
        data.x.iter().map(|row| row.iter().zip(beta).map(|(v, b)| v * b).sum()).collect();
    let mut event_times: Vec<f64> = (0..n)
        .filter(|&i| data.events[i] == 1)
        .map(|i| data.times[i])
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();

    let mut ll = 0.0;
    for &t in &event_times {
        let tied: Vec<usize> =
            (0..n).filter(|&i| data.events[i] == 1 && data.times[i] == t).collect();
        let d = tied.len() as f64;
        let risk_sum: f64 =
            (0..n).filter(|&i| data.times[i] >= t).map(|i| eta[i].exp()).sum();
        let tied_sum: f64 = tied.iter().map(|&i| eta[i].exp()).sum();
        for &i in &tied {
            ll += eta[i];
        }
        match ties {
            TieMethod::Breslow => ll -= d * risk_sum.ln(),
            TieMethod::Efron => {
                for r in 0..tied.len() {
                    ll -= (risk_sum - (r as f64 / d) * tied_sum).ln();
                }
            }
        }
    }
    ll
}

/// Nelson-Aalen cumulative hazard at `t`: sum of d/n over event times <= t.
pub fn nelson_aalen(times: &[f64], events: &[u8], t: f64) -> f64 {
    let mut event_times: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|&(_, &d)| d == 1)
        .map(|(&ti, _)| ti)
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    let mut total = 0.0;
    for &s in event_times.iter().filter(|&&s| s <= t) {
        let d = times.iter().zip(events).filter(|&(&ti, &di)| ti == s && di == 1).count();
        let at_risk = times.iter().filter(|&&ti| ti >= s).count();
        total += d as f64 / at_risk as f64;
    }
    total
}

/// A random arm of `n` subjects on a coarse time grid, so ties are common.
pub fn random_arm(rng: &mut ChaCha8Rng, n: usize, p: usize) -> TinyArm {
    let mut arm = TinyArm { times: Vec::new(), events: Vec::new(), x: Vec::new() };
    for _ in 0..n {
        arm.times.push([1.0, 2.0, 3.0][rng.gen_range(0..3)]);
        arm.events.push(u8::from(rng.gen_bool(0.6)));
        arm.x.push((0..p).map(|_| [0.0, 0.5, 1.0][rng.gen_range(0..3)]).collect());
    }
    if arm.events.iter().all(|&d| d == 0) {
        arm.events[0] = 1;
    }
    arm
}

/// Two tiny arms as one cohort with a numeric covariate per design column.
pub fn tiny_cohort(arm0: &TinyArm, arm1: &TinyArm) -> Cohort {
    let width = arm0.x.first().map_or(0, Vec::len);
    let schema = (0..width)
        .map(|i| CovariateColumn { name: format!("x{i}"), kind: CovariateKind::Numeric })
        .collect();
    let mut records = Vec::new();
    for (arm, data) in [(0u8, arm0), (1u8, arm1)] {
        for i in 0..data.times.len() {
            records.push(IndividualRecord {
                id: format!("a{arm}s{i}"),
                arm,
                covariates: data.x[i].iter().map(|&v| CovariateValue::Numeric(v)).collect(),
                time_days: data.times[i],
                event: data.events[i],
            });
        }
    }
    Cohort { records, schema }
}
