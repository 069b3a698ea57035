//! Confidence intervals and the waning hypothesis test.
//!
//! Summary data gets closed-form delta-method intervals on the log scale
//! of `1 - VE` (or of the waning ratio); individual-level data gets seeded
//! percentile-bootstrap intervals. Sidedness follows the reporting
//! convention: two-sided for `ve1`, `ve2_obs`, `psi_obs`; one-sided lower
//! for `l2`/`l_psi`; one-sided upper for `u2`/`u_psi`.

mod bootstrap;
mod normal;

pub use bootstrap::{
    bootstrap_cis, bootstrap_k_cis, percentile, BootstrapConfig, IndividualEstimator,
};
pub use normal::normal_quantile;

use crate::error::{Error, Result};
use crate::model::{
    CumulativeHazards, KBoundsEstimate, PointCi, StratumHazards, WaningEstimate,
};

/// Confidence level and sidedness rules for every interval this library
/// produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiPolicy {
    alpha: f64,
}

impl CiPolicy {
    pub fn new(alpha: f64) -> Result<CiPolicy> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(CiPolicy { alpha })
    }

    pub fn alpha(self) -> f64 {
        self.alpha
    }

    /// `z_{1-alpha/2}`, for two-sided intervals.
    pub fn z_two_sided(self) -> f64 {
        normal_quantile(1.0 - self.alpha / 2.0).expect("alpha validated")
    }

    /// `z_{1-alpha}`, for one-sided bound intervals.
    pub fn z_one_sided(self) -> f64 {
        normal_quantile(1.0 - self.alpha).expect("alpha validated")
    }
}

impl Default for CiPolicy {
    fn default() -> CiPolicy {
        CiPolicy { alpha: 0.05 }
    }
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

fn hazard_with_variance(sh: &StratumHazards, k: usize, arm: u8) -> Result<(f64, f64)> {
    let cell = sh.interval(k, arm).ok_or_else(|| {
        Error::InvalidConfig(format!("no cumulative hazard for (k={k}, arm={arm})"))
    })?;
    let variance = cell.variance.ok_or_else(|| {
        Error::MissingVariance(format!(
            "variance of Lambda[k={k}, arm={arm}] unavailable (a subinterval has no events)"
        ))
    })?;
    Ok((cell.value, variance))
}

/// Attaches delta-method confidence intervals to a summary-data estimate.
///
/// Variances are computed on the log scale of `1 - VE` for efficacy
/// quantities and of the ratio itself for waning-ratio quantities, then
/// back-transformed, e.g.
/// `var log(1 - ve1) = Var L10/L10^2 + Var L11/L11^2` and
/// `CI(ve1) = 1 - (1 - ve1) exp(+-z sqrt(var))`.
pub fn delta_method_cis(
    ch: &CumulativeHazards,
    est: &WaningEstimate,
    policy: CiPolicy,
) -> Result<WaningEstimate> {
    let sh = stratum_hazards(ch, est.stratum.as_deref())?;
    let (l10, v10) = hazard_with_variance(sh, 1, 0)?;
    let (l11, v11) = hazard_with_variance(sh, 1, 1)?;
    let (l20, v20) = hazard_with_variance(sh, 2, 0)?;
    let (l21, v21) = hazard_with_variance(sh, 2, 1)?;
    for (name, value) in [
        ("ve1", est.ve1.point),
        ("ve2_obs", est.ve2_obs.point),
        ("l2", est.l2.point),
        ("u2", est.u2.point),
    ] {
        if 1.0 - value <= 0.0 {
            return Err(Error::TransformUnavailable(format!(
                "{name} = {value}: log(1 - estimate) is undefined"
            )));
        }
    }

    let rel = |v: f64, l: f64| v / (l * l);
    let var_ve1 = rel(v10, l10) + rel(v11, l11);
    let var_ve2 = rel(v20, l20) + rel(v21, l21);
    let var_l2 = rel(v20, l20) + (v11 + v21) / ((l11 + l21) * (l11 + l21));
    let var_u2 = rel(v21, l21) + (v10 + v20) / ((l10 + l20) * (l10 + l20));
    let var_l_psi = rel(v10, l10)
        + rel(v20, l20)
        + v21 / ((l11 + l21) * (l11 + l21))
        + v11 / ((l11 + l21) * (l11 + l21)) * (l21 * l21) / (l11 * l11);
    let var_u_psi = rel(v11, l11)
        + rel(v21, l21)
        + v20 / ((l10 + l20) * (l10 + l20))
        + v10 / ((l10 + l20) * (l10 + l20)) * (l20 * l20) / (l10 * l10);
    let var_psi_obs = rel(v10, l10) + rel(v11, l11) + rel(v20, l20) + rel(v21, l21);

    let z2 = policy.z_two_sided();
    let z1 = policy.z_one_sided();
    let ve_ci = |point: f64, var: f64, z: f64| {
        let spread = z * var.sqrt();
        (1.0 - (1.0 - point) * spread.exp(), 1.0 - (1.0 - point) * (-spread).exp())
    };
    let (ve1_lo, ve1_hi) = ve_ci(est.ve1.point, var_ve1, z2);
    let (ve2_lo, ve2_hi) = ve_ci(est.ve2_obs.point, var_ve2, z2);
    let (l2_lo, _) = ve_ci(est.l2.point, var_l2, z1);
    let (_, u2_hi) = ve_ci(est.u2.point, var_u2, z1);

    let mut out = est.clone();
    out.ve1 = PointCi { point: est.ve1.point, lower: Some(ve1_lo), upper: Some(ve1_hi) };
    out.ve2_obs = PointCi { point: est.ve2_obs.point, lower: Some(ve2_lo), upper: Some(ve2_hi) };
    out.l2 = PointCi { point: est.l2.point, lower: Some(l2_lo), upper: None };
    out.u2 = PointCi { point: est.u2.point, lower: None, upper: Some(u2_hi) };
    out.l_psi = PointCi {
        point: est.l_psi.point,
        lower: Some(est.l_psi.point * (-z1 * var_l_psi.sqrt()).exp()),
        upper: None,
    };
    out.u_psi = PointCi {
        point: est.u_psi.point,
        lower: None,
        upper: Some(est.u_psi.point * (z1 * var_u_psi.sqrt()).exp()),
    };
    out.psi_obs = est.psi_obs.as_ref().map(|psi| PointCi {
        point: psi.point,
        lower: Some(psi.point * (-z2 * var_psi_obs.sqrt()).exp()),
        upper: Some(psi.point * (z2 * var_psi_obs.sqrt()).exp()),
    });
    out.alpha = Some(policy.alpha());
    Ok(out)
}

/// Attaches delta-method intervals to rare-event K-interval bounds:
/// `var log(1 - l_k) = Var L_k0/L_k0^2 + sum Var L_k'1 / (sum L_k'1)^2`
/// and symmetrically for `u_k`. Intervals that cannot be transformed keep
/// point-only rows and add a warning.
pub fn delta_method_k_cis(
    ch: &CumulativeHazards,
    kb: &KBoundsEstimate,
    policy: CiPolicy,
) -> Result<KBoundsEstimate> {
    if kb.backend != crate::model::KBackend::RareEvent {
        return Err(Error::InvalidConfig(
            "delta-method intervals apply to the rare-event backend; \
             use the bootstrap for the exact backend"
                .into(),
        ));
    }
    let sh = stratum_hazards(ch, kb.stratum.as_deref())?;
    let z1 = policy.z_one_sided();
    let z2 = policy.z_two_sided();
    let mut out = kb.clone();
    out.alpha = Some(policy.alpha());
    for row in &mut out.rows {
        if row.error.is_some() {
            continue;
        }
        let k = row.k;
        let attach = || -> Result<(PointCi, PointCi, PointCi)> {
            let (lk0, vk0) = hazard_with_variance(sh, k, 0)?;
            let (lk1, vk1) = hazard_with_variance(sh, k, 1)?;
            let mut cum0 = 0.0;
            let mut cum1 = 0.0;
            let mut cum_v0 = 0.0;
            let mut cum_v1 = 0.0;
            for kp in 1..=k {
                let (l0, v0) = hazard_with_variance(sh, kp, 0)?;
                let (l1, v1) = hazard_with_variance(sh, kp, 1)?;
                cum0 += l0;
                cum1 += l1;
                cum_v0 += v0;
                cum_v1 += v1;
            }
            let l = row.l.as_ref().expect("row without error has points").point;
            let u = row.u.as_ref().expect("row without error has points").point;
            let ve = row.ve_obs.as_ref().expect("row without error has points").point;
            for (name, value) in [("l", l), ("u", u), ("ve_obs", ve)] {
                if 1.0 - value <= 0.0 {
                    return Err(Error::TransformUnavailable(format!(
                        "{name}[k={k}] = {value}: log(1 - estimate) is undefined"
                    )));
                }
            }
            let var_l = vk0 / (lk0 * lk0) + cum_v1 / (cum1 * cum1);
            let var_u = vk1 / (lk1 * lk1) + cum_v0 / (cum0 * cum0);
            let var_ve = vk0 / (lk0 * lk0) + vk1 / (lk1 * lk1);
            Ok((
                PointCi {
                    point: l,
                    lower: Some(1.0 - (1.0 - l) * (z1 * var_l.sqrt()).exp()),
                    upper: None,
                },
                PointCi {
                    point: u,
                    lower: None,
                    upper: Some(1.0 - (1.0 - u) * (-z1 * var_u.sqrt()).exp()),
                },
                PointCi {
                    point: ve,
                    lower: Some(1.0 - (1.0 - ve) * (z2 * var_ve.sqrt()).exp()),
                    upper: Some(1.0 - (1.0 - ve) * (-z2 * var_ve.sqrt()).exp()),
                },
            ))
        };
        match attach() {
            Ok((l, u, ve)) => {
                row.l = Some(l);
                row.u = Some(u);
                row.ve_obs = Some(ve);
            }
            Err(e) => out.warnings.push(format!("interval k={k}: no interval attached: {e}")),
        }
    }
    Ok(out)
}

/// Observed VE within one subinterval from event counts and person-time,
/// with the rate-ratio interval
/// `1 - (n1/t1)/(n0/t0) exp(-+ z sqrt(1/n0 + 1/n1))`.
pub fn subinterval_ve_ci(n1: u64, t1: f64, n0: u64, t0: f64, alpha: f64) -> Result<PointCi> {
    let policy = CiPolicy::new(alpha)?;
    if n0 == 0 || n1 == 0 {
        return Err(Error::ZeroEvents(format!(
            "subinterval VE interval needs events in both arms, got n0={n0}, n1={n1}"
        )));
    }
    if t0 <= 0.0 || t1 <= 0.0 {
        return Err(Error::ZeroPersonTime(format!("person-time t0={t0}, t1={t1}")));
    }
    let ratio = (n1 as f64 / t1) / (n0 as f64 / t0);
    let spread = policy.z_two_sided() * (1.0 / n0 as f64 + 1.0 / n1 as f64).sqrt();
    Ok(PointCi {
        point: 1.0 - ratio,
        lower: Some(1.0 - ratio * spread.exp()),
        upper: Some(1.0 - ratio * (-spread).exp()),
    })
}

/// Rate and cumulative-incidence estimates for one cell:
/// `lambda = n/t` with `CI(lambda) = lambda exp(+-z/sqrt(n))`, and
/// `mu = 1 - exp(-lambda tau)` with the same hazard-scale transform.
pub fn subgroup_hazard_ci(n: u64, t: f64, tau: f64, alpha: f64) -> Result<(PointCi, PointCi)> {
    let policy = CiPolicy::new(alpha)?;
    if n == 0 {
        return Err(Error::ZeroEvents("rate interval needs at least one event".into()));
    }
    if t <= 0.0 {
        return Err(Error::ZeroPersonTime(format!("person-time t={t}")));
    }
    if tau < 0.0 {
        return Err(Error::InvalidConfig(format!("tau={tau} must be nonnegative")));
    }
    let lambda = n as f64 / t;
    let spread = policy.z_two_sided() / (n as f64).sqrt();
    let lambda_ci = PointCi {
        point: lambda,
        lower: Some(lambda * (-spread).exp()),
        upper: Some(lambda * spread.exp()),
    };
    let mu = |factor: f64| -(-lambda * tau * factor).exp_m1();
    let mu_ci = PointCi {
        point: mu(1.0),
        lower: Some(mu((-spread).exp())),
        upper: Some(mu(spread.exp())),
    };
    Ok((lambda_ci, mu_ci))
}

/// Direction of a rejected waning null.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaningDirection {
    Waning,
    Strengthening,
    None,
}

impl WaningDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            WaningDirection::Waning => "waning",
            WaningDirection::Strengthening => "strengthening",
            WaningDirection::None => "none",
        }
    }
}

/// Outcome of the partial-identification waning test.
#[derive(Debug, Clone, PartialEq)]
pub struct WaningTestResult {
    pub reject: bool,
    pub direction: WaningDirection,
    pub alpha: f64,
    /// Which confidence limit crossed 1, or why no rejection was possible.
    pub basis: String,
}

/// Tests the no-waning null `psi = 1`, which implies
/// `l_psi <= 1 <= u_psi`: reject with direction waning when the upper
/// one-sided limit of `u_psi` falls below 1, and with direction
/// strengthening when the lower one-sided limit of `l_psi` exceeds 1.
pub fn waning_test(est: &WaningEstimate) -> Result<WaningTestResult> {
    let alpha = est
        .alpha
        .ok_or_else(|| Error::MissingCi("estimate carries no confidence intervals".into()))?;
    let u_upper = est.u_psi.upper.ok_or_else(|| {
        Error::MissingCi("one-sided upper limit of u_psi unavailable".into())
    })?;
    let l_lower = est.l_psi.lower.ok_or_else(|| {
        Error::MissingCi("one-sided lower limit of l_psi unavailable".into())
    })?;
    let result = if u_upper < 1.0 {
        WaningTestResult {
            reject: true,
            direction: WaningDirection::Waning,
            alpha,
            basis: format!("upper limit of u_psi = {u_upper:.4} < 1"),
        }
    } else if l_lower > 1.0 {
        WaningTestResult {
            reject: true,
            direction: WaningDirection::Strengthening,
            alpha,
            basis: format!("lower limit of l_psi = {l_lower:.4} > 1"),
        }
    } else {
        WaningTestResult {
            reject: false,
            direction: WaningDirection::None,
            alpha,
            basis: format!(
                "identified interval for psi reaches 1: \
                 l_psi lower limit {l_lower:.4}, u_psi upper limit {u_upper:.4}"
            ),
        }
    };
    Ok(result)
}
