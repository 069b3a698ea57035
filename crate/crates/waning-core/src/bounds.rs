//! Point estimators: observed vaccine efficacies, the sharp bounds on the
//! interval-2 challenge effect, the waning-ratio bounds, and their
//! K-interval generalization.
//!
//! Degenerate values (vanishing denominators, non-finite results) are
//! reported raw and named in `WaningEstimate::degenerate`; nothing is
//! clamped.

use crate::error::{Error, Result};
use crate::hazard::{day_expanded_hazards, product_cumulative_incidence};
use crate::model::{
    CumulativeHazards, EstimationMethod, KBackend, KBoundRow, KBoundsEstimate, PointCi,
    StratumHazards, Ve2Definition, WaningEstimate,
};

/// Relative threshold below which a denominator is treated as vanishing for
/// degeneracy flagging (values are still computed, never clamped).
const VANISHING: f64 = 1e-12;

/// Naive waning contrast `(1 - ve1) / (1 - ve2_obs)`.
pub fn psi_obs(ve1: f64, ve2_obs: f64) -> Result<f64> {
    if !(ve1 <= 1.0 && ve2_obs <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "vaccine efficacies must be at most 1, got ve1={ve1}, ve2_obs={ve2_obs}"
        )));
    }
    if ve2_obs == 1.0 {
        return Err(Error::DegenerateVe(
            "ve2_obs = 1: the waning contrast (1 - ve1)/(1 - ve2_obs) is undefined".into(),
        ));
    }
    Ok((1.0 - ve1) / (1.0 - ve2_obs))
}

fn hazard_value(sh: &StratumHazards, k: usize, arm: u8) -> Result<f64> {
    sh.interval(k, arm)
        .map(|c| c.value)
        .ok_or_else(|| Error::InvalidConfig(format!("no cumulative hazard for (k={k}, arm={arm})")))
}

fn stratum_hazards<'a>(
    ch: &'a CumulativeHazards,
    stratum: Option<&str>,
) -> Result<&'a StratumHazards> {
    ch.stratum(stratum).ok_or_else(|| {
        Error::InvalidConfig(match stratum {
            Some(s) => format!("stratum `{s}` not present in the hazard estimates"),
            None => "no marginal stratum present in the hazard estimates".into(),
        })
    })
}

/// Two-interval estimators from cumulative hazards (rare-event regime):
/// `ve1 = 1 - L11/L10`, `ve2_obs = 1 - L21/L20`,
/// `l2 = 1 - (L11 + L21)/L20`, `u2 = 1 - L21/(L10 + L20)`,
/// `l_psi = (L11/L10) L20/(L11 + L21)`, `u_psi = (L11/L10)(L10 + L20)/L21`.
///
/// Uses intervals 1 and 2; use [`k_interval_bounds`] for later intervals.
pub fn bounds_from_hazards(
    ch: &CumulativeHazards,
    stratum: Option<&str>,
) -> Result<WaningEstimate> {
    let sh = stratum_hazards(ch, stratum)?;
    let l10 = hazard_value(sh, 1, 0)?;
    let l11 = hazard_value(sh, 1, 1)?;
    let l20 = hazard_value(sh, 2, 0)?;
    let l21 = hazard_value(sh, 2, 1)?;
    if l10 == 0.0 {
        return Err(Error::ZeroDenominator("Lambda[k=1, arm=0] is zero".into()));
    }
    if l20 == 0.0 {
        return Err(Error::ZeroDenominator("Lambda[k=2, arm=0] is zero".into()));
    }

    let scale = l10 + l11 + l20 + l21;
    let ve1 = 1.0 - l11 / l10;
    let ve2_obs = 1.0 - l21 / l20;
    let l2 = 1.0 - (l11 + l21) / l20;
    let u2 = 1.0 - l21 / (l10 + l20);
    let l_psi = (l11 / l10) * l20 / (l11 + l21);
    let u_psi = (l11 / l10) * (l10 + l20) / l21;

    let mut degenerate = Vec::new();
    let mut flag = |name: &str, value: f64, denominator: f64| {
        if !value.is_finite() || denominator < VANISHING * scale {
            degenerate.push(name.to_string());
        }
    };
    flag("l_psi", l_psi, l11 + l21);
    flag("u_psi", u_psi, l21);
    let psi = if l21 < VANISHING * scale {
        degenerate.push("psi_obs".to_string());
        None
    } else {
        Some(PointCi::point_only(psi_obs(ve1, ve2_obs)?))
    };

    let mut warnings = Vec::new();
    for (arm, total) in [(0, l10 + l20), (1, l11 + l21)] {
        if total > 0.1 {
            warnings.push(format!(
                "arm {arm} cumulative hazard sums to {total:.4}; the rare-event \
                 approximation may be inaccurate"
            ));
        }
    }

    Ok(WaningEstimate {
        ve1: PointCi::point_only(ve1),
        ve2_obs: PointCi::point_only(ve2_obs),
        l2: PointCi::point_only(l2),
        u2: PointCi::point_only(u2),
        l_psi: PointCi::point_only(l_psi),
        u_psi: PointCi::point_only(u_psi),
        psi_obs: psi,
        alpha: None,
        method: EstimationMethod::SummaryDelta,
        stratum: stratum.map(str::to_string),
        ve2_definition: Ve2Definition::HazardRatio,
        degenerate,
        warnings,
        bootstrap: None,
    })
}

/// Two-interval plugin estimators from cumulative incidences
/// `mu[k-1][arm]`, exact in the discrete-time model:
/// `ve2_obs = 1 - (m21 - m11)/(m20 - m10) * (1 - m10)/(1 - m11)`,
/// `l2 = 1 - m21/(m20 - m10)`, `u2 = 1 - (m21 - m11)/m20`, and the waning
/// ratio bounds implied by the same contrasts.
pub fn bounds_from_incidences(
    mu: [[f64; 2]; 2],
    method: EstimationMethod,
) -> Result<WaningEstimate> {
    let [[m10, m11], [m20, m21]] = mu;
    for (name, value) in
        [("mu_{1,0}", m10), ("mu_{1,1}", m11), ("mu_{2,0}", m20), ("mu_{2,1}", m21)]
    {
        if !(0.0..1.0).contains(&value) {
            return Err(Error::InvalidProbabilities(format!(
                "{name} = {value} outside [0, 1)"
            )));
        }
    }
    if m20 < m10 || m21 < m11 {
        return Err(Error::NonMonotoneIncidence(format!(
            "cumulative incidence decreases between intervals: \
             arm 0 {m10} -> {m20}, arm 1 {m11} -> {m21}"
        )));
    }
    if m10 == 0.0 {
        return Err(Error::ZeroDenominator("mu_{1,0} is zero".into()));
    }
    if m20 == m10 {
        return Err(Error::ZeroDenominator(
            "mu_{2,0} - mu_{1,0} is zero: no placebo incidence in interval 2".into(),
        ));
    }

    let d0 = m20 - m10;
    let d1 = m21 - m11;
    let scale = m10 + m11 + m20 + m21;
    let ve1 = 1.0 - m11 / m10;
    let ve2_obs = 1.0 - (d1 / d0) * (1.0 - m10) / (1.0 - m11);
    let l2 = 1.0 - m21 / d0;
    let u2 = 1.0 - d1 / m20;
    let l_psi = (m11 / m10) * d0 / m21;
    let u_psi = (m11 / m10) * m20 / d1;

    let mut degenerate = Vec::new();
    let mut flag = |name: &str, value: f64, denominator: f64| {
        if !value.is_finite() || denominator < VANISHING * scale {
            degenerate.push(name.to_string());
        }
    };
    flag("l_psi", l_psi, m21);
    flag("u_psi", u_psi, d1);
    let psi = if d1 < VANISHING * scale {
        degenerate.push("psi_obs".to_string());
        None
    } else {
        Some(PointCi::point_only(psi_obs(ve1, ve2_obs)?))
    };

    Ok(WaningEstimate {
        ve1: PointCi::point_only(ve1),
        ve2_obs: PointCi::point_only(ve2_obs),
        l2: PointCi::point_only(l2),
        u2: PointCi::point_only(u2),
        l_psi: PointCi::point_only(l_psi),
        u_psi: PointCi::point_only(u_psi),
        psi_obs: psi,
        alpha: None,
        method,
        stratum: None,
        ve2_definition: Ve2Definition::Conditional,
        degenerate,
        warnings: Vec::new(),
    bootstrap: None,
    })
}

/// Per-interval bounds for `k = 2..K`.
///
/// The rare-event backend uses cumulative-hazard sums,
/// `l_k = 1 - sum_{k'<=k} L_{k',1} / L_{k,0}` and
/// `u_k = 1 - L_{k,1} / sum_{k'<=k} L_{k',0}`; the exact backend evaluates
/// the same contrasts on product-form cumulative incidences. A failing
/// interval carries its error message without aborting the others.
pub fn k_interval_bounds(
    ch: &CumulativeHazards,
    stratum: Option<&str>,
    backend: KBackend,
) -> Result<KBoundsEstimate> {
    let sh = stratum_hazards(ch, stratum)?;
    let k_max = ch.k_max;
    if k_max < 2 {
        return Err(Error::InvalidIntervalSpec(format!("K >= 2 required, got K={k_max}")));
    }
    let lambda = |k: usize, arm: u8| hazard_value(sh, k, arm);
    let mut warnings = Vec::new();
    let mut rows = Vec::new();

    match backend {
        KBackend::RareEvent => {
            for (arm, label) in [(0u8, "arm 0"), (1u8, "arm 1")] {
                let total: f64 =
                    (1..=k_max).map(|k| lambda(k, arm).unwrap_or(0.0)).sum();
                if total > 0.1 {
                    warnings.push(format!(
                        "{label} cumulative hazard sums to {total:.4}; the rare-event \
                         approximation may be inaccurate"
                    ));
                }
            }
            let mut cum0 = lambda(1, 0)?;
            let mut cum1 = lambda(1, 1)?;
            for k in 2..=k_max {
                let lk0 = lambda(k, 0)?;
                let lk1 = lambda(k, 1)?;
                cum0 += lk0;
                cum1 += lk1;
                rows.push(if lk0 == 0.0 {
                    KBoundRow {
                        k,
                        l: None,
                        u: None,
                        ve_obs: None,
                        error: Some(format!("Lambda[k={k}, arm=0] is zero")),
                    }
                } else {
                    KBoundRow {
                        k,
                        l: Some(PointCi::point_only(1.0 - cum1 / lk0)),
                        u: Some(PointCi::point_only(1.0 - lk1 / cum0)),
                        ve_obs: Some(PointCi::point_only(1.0 - lk1 / lk0)),
                        error: None,
                    }
                });
            }
        }
        KBackend::ExactProduct => {
            let steps0 = day_expanded_hazards(sh, 0)?;
            let steps1 = day_expanded_hazards(sh, 1)?;
            let y = |steps: &[Vec<f64>], k: usize| product_cumulative_incidence(steps, k);
            for k in 2..=k_max {
                rows.push(match exact_row(k, &steps0, &steps1, &y) {
                    Ok(row) => row,
                    Err(e) => {
                        KBoundRow { k, l: None, u: None, ve_obs: None, error: Some(e.to_string()) }
                    }
                });
            }
        }
    }

    Ok(KBoundsEstimate {
        rows,
        backend,
        alpha: None,
        method: EstimationMethod::SummaryDelta,
        stratum: stratum.map(str::to_string),
        warnings,
        bootstrap: None,
    })
}

fn exact_row(
    k: usize,
    steps0: &[Vec<f64>],
    steps1: &[Vec<f64>],
    y: &dyn Fn(&[Vec<f64>], usize) -> Result<f64>,
) -> Result<KBoundRow> {
    incidence_row(k, y(steps0, k - 1)?, y(steps0, k)?, y(steps1, k - 1)?, y(steps1, k)?)
}

/// Per-interval bound rows straight from per-arm cumulative incidence
/// sequences (`y[k-1]` is the incidence through interval `k`). A failing
/// interval carries its error message without aborting the others.
pub fn k_bounds_from_incidences(y0: &[f64], y1: &[f64]) -> Result<Vec<KBoundRow>> {
    if y0.len() != y1.len() {
        return Err(Error::InvalidConfig(format!(
            "incidence sequences differ in length: {} vs {}",
            y0.len(),
            y1.len()
        )));
    }
    if y0.len() < 2 {
        return Err(Error::InvalidIntervalSpec(format!("K >= 2 required, got K={}", y0.len())));
    }
    for (arm, y) in [(0, y0), (1, y1)] {
        for (idx, value) in y.iter().enumerate() {
            if !(0.0..=1.0).contains(value) {
                return Err(Error::InvalidProbabilities(format!(
                    "arm {arm} cumulative incidence through interval {} is {value}",
                    idx + 1
                )));
            }
        }
    }
    Ok((2..=y0.len())
        .map(|k| match incidence_row(k, y0[k - 2], y0[k - 1], y1[k - 2], y1[k - 1]) {
            Ok(row) => row,
            Err(e) => KBoundRow { k, l: None, u: None, ve_obs: None, error: Some(e.to_string()) },
        })
        .collect())
}

/// Interval-`k` bounds and conditional observed VE from cumulative
/// incidences through intervals `k-1` and `k` in each arm:
/// `l_k = 1 - y_{k,1}/(y_{k,0} - y_{k-1,0})`,
/// `u_k = 1 - (y_{k,1} - y_{k-1,1})/y_{k,0}`, and
/// `ve_k = 1 - [dy_1/(1 - y_{k-1,1})] / [dy_0/(1 - y_{k-1,0})]`.
pub(crate) fn incidence_row(
    k: usize,
    y0p: f64,
    y0k: f64,
    y1p: f64,
    y1k: f64,
) -> Result<KBoundRow> {
    let d0 = y0k - y0p;
    let d1 = y1k - y1p;
    if d0 <= 0.0 {
        return Err(Error::ZeroDenominator(format!(
            "arm 0 incidence does not increase over interval k={k}"
        )));
    }
    if y0k == 0.0 {
        return Err(Error::ZeroDenominator(format!(
            "arm 0 cumulative incidence through interval k={k} is zero"
        )));
    }
    if y0p >= 1.0 || y1p >= 1.0 {
        return Err(Error::ZeroDenominator(format!(
            "an arm is fully infected before interval k={k}"
        )));
    }
    let ve = 1.0 - (d1 / (1.0 - y1p)) / (d0 / (1.0 - y0p));
    Ok(KBoundRow {
        k,
        l: Some(PointCi::point_only(1.0 - y1k / d0)),
        u: Some(PointCi::point_only(1.0 - d1 / y0k)),
        ve_obs: Some(PointCi::point_only(ve)),
        error: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HazardCell, IntervalSpec, RateCell};
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    /// Hazards with one 30-day subinterval per interval, constant daily rate.
    pub(crate) fn hazards_from_lambdas(per_interval: &[[f64; 2]]) -> CumulativeHazards {
        let spec = IntervalSpec::equal_intervals(per_interval.len(), 30);
        let mut sh = StratumHazards::default();
        for (idx, arms) in per_interval.iter().enumerate() {
            let k = idx + 1;
            for arm in [0u8, 1u8] {
                let value = arms[arm as usize];
                sh.rates.push(RateCell {
                    k,
                    j: 1,
                    arm,
                    lambda: value / 30.0,
                    variance: None,
                    duration_days: 30.0,
                    events: 0,
                    person_time: 0.0,
                });
                sh.intervals.push(HazardCell { k, arm, value, variance: None });
            }
        }
        let mut strata = BTreeMap::new();
        strata.insert(None, sh);
        let _ = spec;
        CumulativeHazards { k_max: per_interval.len(), strata }
    }

    #[test]
    fn anchor_hazards_reproduce_published_point_estimates() {
        let ch = hazards_from_lambdas(&[[0.020, 0.001], [0.029, 0.003]]);
        let est = bounds_from_hazards(&ch, None).unwrap();
        assert_relative_eq!(est.ve1.point, 0.95, max_relative = 1e-12);
        assert_relative_eq!(est.ve2_obs.point, 0.89655172413793105, max_relative = 1e-12);
        assert_relative_eq!(est.l2.point, 0.86206896551724133, max_relative = 1e-12);
        assert_relative_eq!(est.u2.point, 0.93877551020408168, max_relative = 1e-12);
        assert_relative_eq!(est.l_psi.point, 0.36250000000000004, max_relative = 1e-12);
        assert_relative_eq!(est.u_psi.point, 0.81666666666666676, max_relative = 1e-12);
        assert_relative_eq!(
            est.psi_obs.as_ref().unwrap().point,
            0.48333333333333339,
            max_relative = 1e-12
        );
        assert!(est.degenerate.is_empty());
        assert!(est.warnings.is_empty());
        let [r1, r2] = est.identity_residuals();
        assert!(r1 < 1e-12 && r2 < 1e-12);
    }

    #[test]
    fn equal_hazards_give_symmetric_bounds() {
        let ch = hazards_from_lambdas(&[[0.01, 0.01], [0.01, 0.01]]);
        let est = bounds_from_hazards(&ch, None).unwrap();
        assert_relative_eq!(est.ve1.point, 0.0, epsilon = 1e-15);
        assert_relative_eq!(est.ve2_obs.point, 0.0, epsilon = 1e-15);
        assert_relative_eq!(est.l2.point, -1.0, max_relative = 1e-15);
        assert_relative_eq!(est.u2.point, 0.5, max_relative = 1e-15);
        assert_relative_eq!(est.l_psi.point, 0.5, max_relative = 1e-15);
        assert_relative_eq!(est.u_psi.point, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn zero_placebo_hazard_is_a_zero_denominator() {
        let ch = hazards_from_lambdas(&[[0.02, 0.001], [0.0, 0.003]]);
        let err = bounds_from_hazards(&ch, None).unwrap_err();
        assert!(matches!(err, Error::ZeroDenominator(_)), "{err}");
        assert!(err.to_string().contains("k=2"), "{err}");
    }

    #[test]
    fn zero_vaccine_hazard_degenerates_psi_quantities() {
        let ch = hazards_from_lambdas(&[[0.02, 0.001], [0.029, 0.0]]);
        let est = bounds_from_hazards(&ch, None).unwrap();
        assert_eq!(est.ve2_obs.point, 1.0);
        assert_eq!(est.u2.point, 1.0);
        assert!(est.u_psi.point.is_infinite());
        assert!(est.psi_obs.is_none());
        assert!(est.degenerate.contains(&"u_psi".to_string()));
        assert!(est.degenerate.contains(&"psi_obs".to_string()));
        assert!(!est.degenerate.contains(&"l_psi".to_string()));
    }

    #[test]
    fn heavy_hazards_warn_about_the_rare_event_regime() {
        let ch = hazards_from_lambdas(&[[0.08, 0.01], [0.09, 0.02]]);
        let est = bounds_from_hazards(&ch, None).unwrap();
        assert!(est.warnings.iter().any(|w| w.contains("rare-event")), "{:?}", est.warnings);
    }

    #[test]
    fn incidence_plugins_match_reference_values() {
        let est = bounds_from_incidences(
            [[0.075, 0.02], [0.12, 0.04]],
            EstimationMethod::CoxBootstrap,
        )
        .unwrap();
        assert_relative_eq!(est.ve1.point, 0.73333333333333339, max_relative = 1e-12);
        assert_relative_eq!(est.ve2_obs.point, 0.58049886621315183, max_relative = 1e-12);
        assert_relative_eq!(est.l2.point, 0.11111111111111105, max_relative = 1e-9);
        assert_relative_eq!(est.u2.point, 0.83333333333333326, max_relative = 1e-12);
        assert_relative_eq!(est.l_psi.point, 0.3, max_relative = 1e-12);
        assert_relative_eq!(est.u_psi.point, 1.6, max_relative = 1e-12);
        assert_eq!(est.ve2_definition, Ve2Definition::Conditional);
        let [r1, r2] = est.identity_residuals();
        assert!(r1 < 1e-12 && r2 < 1e-12);
    }

    #[test]
    fn identical_arm_incidences_have_zero_efficacy() {
        let est = bounds_from_incidences(
            [[0.075, 0.075], [0.12, 0.12]],
            EstimationMethod::CoxBootstrap,
        )
        .unwrap();
        assert_relative_eq!(est.ve1.point, 0.0, epsilon = 1e-15);
        assert_relative_eq!(est.ve2_obs.point, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn flat_placebo_incidence_is_a_zero_denominator() {
        let err = bounds_from_incidences(
            [[0.12, 0.02], [0.12, 0.04]],
            EstimationMethod::CoxBootstrap,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ZeroDenominator(_)), "{err}");
    }

    #[test]
    fn decreasing_incidence_is_rejected() {
        let err = bounds_from_incidences(
            [[0.075, 0.05], [0.12, 0.04]],
            EstimationMethod::CoxBootstrap,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonMonotoneIncidence(_)), "{err}");
    }

    #[test]
    fn psi_obs_reference_values() {
        assert_relative_eq!(psi_obs(0.95, 0.90).unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(psi_obs(0.8, 0.8).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            psi_obs(0.57, 0.17).unwrap(),
            0.51807228915662662,
            max_relative = 1e-12
        );
        assert!(matches!(psi_obs(0.9, 1.0), Err(Error::DegenerateVe(_))));
    }

    #[test]
    fn k2_rare_event_rows_match_the_two_interval_estimator() {
        let ch = hazards_from_lambdas(&[[0.020, 0.001], [0.029, 0.003]]);
        let est = bounds_from_hazards(&ch, None).unwrap();
        let kb = k_interval_bounds(&ch, None, KBackend::RareEvent).unwrap();
        assert_eq!(kb.rows.len(), 1);
        let row = &kb.rows[0];
        assert_eq!(row.k, 2);
        assert_eq!(row.l.as_ref().unwrap().point, est.l2.point);
        assert_eq!(row.u.as_ref().unwrap().point, est.u2.point);
        assert_eq!(row.ve_obs.as_ref().unwrap().point, est.ve2_obs.point);
    }

    #[test]
    fn four_interval_rare_event_example() {
        let ch = hazards_from_lambdas(&[
            [0.01, 0.002],
            [0.01, 0.002],
            [0.01, 0.002],
            [0.01, 0.002],
        ]);
        let kb = k_interval_bounds(&ch, None, KBackend::RareEvent).unwrap();
        let row4 = kb.rows.iter().find(|r| r.k == 4).unwrap();
        assert_relative_eq!(row4.l.as_ref().unwrap().point, 0.2, max_relative = 1e-12);
        assert_relative_eq!(row4.u.as_ref().unwrap().point, 0.95, max_relative = 1e-12);
        assert_relative_eq!(row4.ve_obs.as_ref().unwrap().point, 0.8, max_relative = 1e-12);
    }

    #[test]
    fn failed_interval_reports_without_aborting_the_others() {
        let ch = hazards_from_lambdas(&[[0.01, 0.002], [0.0, 0.002], [0.01, 0.002]]);
        let kb = k_interval_bounds(&ch, None, KBackend::RareEvent).unwrap();
        let row2 = kb.rows.iter().find(|r| r.k == 2).unwrap();
        assert!(row2.error.as_ref().unwrap().contains("k=2"));
        assert!(row2.l.is_none());
        let row3 = kb.rows.iter().find(|r| r.k == 3).unwrap();
        assert!(row3.error.is_none());
        assert!(row3.l.is_some());
    }

    #[test]
    fn exact_backend_brackets_its_own_ve() {
        let ch = hazards_from_lambdas(&[[0.02, 0.004], [0.03, 0.009], [0.025, 0.012]]);
        let kb = k_interval_bounds(&ch, None, KBackend::ExactProduct).unwrap();
        for row in &kb.rows {
            assert!(row.error.is_none(), "{:?}", row.error);
            let l = row.l.as_ref().unwrap().point;
            let u = row.u.as_ref().unwrap().point;
            let ve = row.ve_obs.as_ref().unwrap().point;
            assert!(l <= ve && ve <= u, "k={}: {l} <= {ve} <= {u}", row.k);
        }
    }

    #[test]
    fn backends_agree_to_first_order_on_light_hazards() {
        let ch = hazards_from_lambdas(&[[0.012, 0.003], [0.013, 0.004]]);
        let rare = k_interval_bounds(&ch, None, KBackend::RareEvent).unwrap();
        let exact = k_interval_bounds(&ch, None, KBackend::ExactProduct).unwrap();
        let sum: f64 = 0.012 + 0.003 + 0.013 + 0.004;
        for (r, e) in rare.rows.iter().zip(&exact.rows) {
            for (a, b) in [
                (&r.l, &e.l),
                (&r.u, &e.u),
                (&r.ve_obs, &e.ve_obs),
            ] {
                let a = a.as_ref().unwrap().point;
                let b = b.as_ref().unwrap().point;
                let log_ratio = ((1.0 - a) / (1.0 - b)).ln().abs();
                assert!(log_ratio <= 2.0 * sum, "log-ratio {log_ratio} vs {}", 2.0 * sum);
            }
        }
    }
}
