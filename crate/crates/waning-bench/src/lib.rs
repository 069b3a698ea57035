//! Shared fixtures for the criterion benchmarks.

use waning_core::model::{IntervalSpec, SummaryCell, SummaryTable};
use waning_core::simulate::{
    simulate_dgm_logistic, DgmLogisticConfig, LogisticIntervalParams,
};

/// Two-interval summary table with hazard-equivalent person-time.
pub fn summary_table() -> SummaryTable {
    let spec = IntervalSpec::equal_intervals(2, 30);
    let cells = [(1, 0, 20u64, 0.020f64), (1, 1, 1, 0.001), (2, 0, 29, 0.029), (2, 1, 3, 0.003)]
        .into_iter()
        .map(|(k, arm, events, big_lambda)| SummaryCell {
            k,
            j: 1,
            arm,
            stratum: None,
            events,
            person_time: events as f64 * 30.0 / big_lambda,
        })
        .collect();
    SummaryTable { spec, cells }
}

/// Logistic-hazard config sized for estimator benchmarks.
pub fn logistic_config(n: usize) -> DgmLogisticConfig {
    DgmLogisticConfig {
        intervals: vec![
            LogisticIntervalParams { beta0: -4.5, beta_arm: -0.9, beta_l: 0.3 },
            LogisticIntervalParams { beta0: -4.3, beta_arm: -0.5, beta_l: 0.3 },
        ],
        censor_hazard: 0.02,
        n,
        seed: 11,
        interval_days: 30,
    }
}

/// A simulated cohort of `n` subjects from the logistic mechanism.
pub fn cohort(n: usize) -> waning_core::model::Cohort {
    simulate_dgm_logistic(&logistic_config(n)).expect("valid config")
}
