//! Synthetic-data generators: the bound-attaining counterfactual
//! mechanism, the discrete-time logistic-hazard mechanism with censoring,
//! and a configurable exposure mechanism (leaky or all-or-nothing with
//! latent heterogeneity) whose true challenge effect is known in closed
//! form.
//!
//! Every generator is a pure function of its config: subject `i` draws
//! from a ChaCha stream determined only by `(seed, i)`, so output is
//! byte-identical across runs and thread counts.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hazard::expit;
use crate::model::{
    Cohort, CovariateColumn, CovariateKind, CovariateValue, IndividualRecord, IntervalSpec,
};

fn validate_probability(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidProbabilities(format!("{name} = {value} outside [0, 1]")));
    }
    Ok(())
}

fn validate_common(n: usize, interval_days: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample size n must be positive".into()));
    }
    if interval_days == 0 {
        return Err(Error::InvalidConfig("interval length must be positive".into()));
    }
    Ok(())
}

fn subject_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Which bound the counterfactual assignment rule attains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundTarget {
    Lower,
    Upper,
}

impl BoundTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundTarget::Lower => "lower",
            BoundTarget::Upper => "upper",
        }
    }
}

/// One baseline stratum of the bound-attaining mechanism:
/// `p[k-1][arm]` is the interval-`k` incidence increment
/// `E[dY_k | A=arm, L=label]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumProbs {
    pub label: String,
    pub weight: f64,
    pub p: [[f64; 2]; 2],
}

/// Config for the bound-attaining counterfactual mechanism: a shared
/// uniform latent `U_Y` drives both observed interval outcomes and the
/// isolation-world (skip interval-1 exposure) counterfactuals, arranged so
/// the true second-interval challenge effect lands exactly on the chosen
/// bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgmBoundsConfig {
    pub strata: Vec<StratumProbs>,
    /// P(A = 1).
    pub p_treat: f64,
    pub target: BoundTarget,
    pub n: usize,
    pub seed: u64,
    pub interval_days: u32,
}

impl DgmBoundsConfig {
    /// Single-stratum config over two `interval_days`-day intervals.
    pub fn marginal(p: [[f64; 2]; 2], target: BoundTarget, n: usize, seed: u64) -> DgmBoundsConfig {
        DgmBoundsConfig {
            strata: vec![StratumProbs { label: "all".into(), weight: 1.0, p }],
            p_treat: 0.5,
            target,
            n,
            seed,
            interval_days: 30,
        }
    }

    pub fn spec(&self) -> IntervalSpec {
        IntervalSpec::equal_intervals(2, self.interval_days)
    }

    fn ensure_valid(&self) -> Result<()> {
        validate_common(self.n, self.interval_days)?;
        if self.strata.is_empty() {
            return Err(Error::InvalidConfig("at least one stratum required".into()));
        }
        if !(self.p_treat > 0.0 && self.p_treat < 1.0) {
            return Err(Error::InvalidProbabilities(format!(
                "p_treat = {} outside (0, 1)",
                self.p_treat
            )));
        }
        let mut total_weight = 0.0;
        for stratum in &self.strata {
            if !(stratum.weight > 0.0 && stratum.weight.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "stratum `{}` has nonpositive weight {}",
                    stratum.label, stratum.weight
                )));
            }
            total_weight += stratum.weight;
            for arm in [0usize, 1usize] {
                let p1 = stratum.p[0][arm];
                let p2 = stratum.p[1][arm];
                validate_probability(&format!("p[k=1, arm={arm}, l={}]", stratum.label), p1)?;
                validate_probability(&format!("p[k=2, arm={arm}, l={}]", stratum.label), p2)?;
                if p1 + p2 > 1.0 {
                    return Err(Error::InvalidProbabilities(format!(
                        "p1 + p2 = {} > 1 for arm {arm}, stratum `{}`",
                        p1 + p2,
                        stratum.label
                    )));
                }
            }
        }
        if !(total_weight.is_finite() && total_weight > 0.0) {
            return Err(Error::InvalidConfig("stratum weights sum to zero".into()));
        }
        Ok(())
    }

    /// Expected cumulative-incidence margins `mu[k-1][arm]` and the bounds
    /// and true challenge effect they imply.
    pub fn analytic_truth(&self) -> Result<DgmBoundsTruth> {
        self.ensure_valid()?;
        let total: f64 = self.strata.iter().map(|s| s.weight).sum();
        let mut mu = [[0.0f64; 2]; 2];
        for stratum in &self.strata {
            let w = stratum.weight / total;
            for arm in [0usize, 1usize] {
                mu[0][arm] += w * stratum.p[0][arm];
                mu[1][arm] += w * (stratum.p[0][arm] + stratum.p[1][arm]);
            }
        }
        let d0 = mu[1][0] - mu[0][0];
        let d1 = mu[1][1] - mu[0][1];
        let l2 = 1.0 - mu[1][1] / d0;
        let u2 = 1.0 - d1 / mu[1][0];
        let ve2_challenge = match self.target {
            BoundTarget::Lower => l2,
            BoundTarget::Upper => u2,
        };
        Ok(DgmBoundsTruth { mu, l2, u2, ve2_challenge })
    }
}

/// Closed-form expectations implied by a [`DgmBoundsConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct DgmBoundsTruth {
    /// Expected cumulative incidence `mu[k-1][arm]`.
    pub mu: [[f64; 2]; 2],
    pub l2: f64,
    pub u2: f64,
    /// `l2` under the lower target, `u2` under the upper target.
    pub ve2_challenge: f64,
}

/// Per-subject counterfactuals materialized by the bound-attaining
/// mechanism: interval-1 outcome under exposure in both-interval world,
/// and the isolation-world interval-2 outcomes for each arm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterfactualRow {
    pub id: String,
    pub dy1_a1_e1: u8,
    pub dy2_a1_iso: u8,
    pub dy2_a0_iso: u8,
}

/// Observed cohort plus the counterfactual panel.
#[derive(Debug, Clone, PartialEq)]
pub struct DgmBoundsOutput {
    pub cohort: Cohort,
    pub panel: Vec<CounterfactualRow>,
    pub spec: IntervalSpec,
}

/// Simulates the bound-attaining mechanism. Each subject draws
/// `(L, A, U_Y)`; the observed outcomes are
/// `dY_1 = I(U_Y <= p_1)`, `dY_2 = I(p_1 < U_Y <= p_1 + p_2)` at the
/// subject's own `(A, L)`, while the counterfactual panel records the
/// isolation-world interval-2 outcomes whose contrast equals the chosen
/// bound in expectation.
pub fn simulate_dgm_bounds(cfg: &DgmBoundsConfig) -> Result<DgmBoundsOutput> {
    cfg.ensure_valid()?;
    let spec = cfg.spec();
    let end1 = f64::from(spec.end_day(1).expect("two intervals"));
    let end2 = f64::from(spec.end_day(2).expect("two intervals"));
    let total_weight: f64 = cfg.strata.iter().map(|s| s.weight).sum();
    let cumulative: Vec<f64> = cfg
        .strata
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.weight / total_weight;
            Some(*acc)
        })
        .collect();
    let stratified = cfg.strata.len() > 1;

    let rows: Vec<(IndividualRecord, CounterfactualRow)> = (0..cfg.n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = subject_rng(cfg.seed, i);
            let l_draw: f64 = rng.gen();
            let stratum_idx = cumulative.partition_point(|c| *c < l_draw).min(cfg.strata.len() - 1);
            let stratum = &cfg.strata[stratum_idx];
            let arm: u8 = if rng.gen::<f64>() < cfg.p_treat { 1 } else { 0 };
            let u_y: f64 = rng.gen();

            let p1 = stratum.p[0][arm as usize];
            let p2 = stratum.p[1][arm as usize];
            let dy1 = u_y <= p1;
            let dy2 = !dy1 && u_y <= p1 + p2;
            let (time_days, event) = if dy1 {
                (end1, 1)
            } else if dy2 {
                (end2, 1)
            } else {
                (end2, 0)
            };

            let p11 = stratum.p[0][1];
            let p21 = stratum.p[1][1];
            let p10 = stratum.p[0][0];
            let p20 = stratum.p[1][0];
            let dy1_a1_e1 = u8::from(u_y <= p11);
            let (dy2_a1_iso, dy2_a0_iso) = match cfg.target {
                BoundTarget::Lower => (
                    u8::from(u_y <= p11 + p21),
                    u8::from(p10 < u_y && u_y <= p10 + p20),
                ),
                BoundTarget::Upper => (
                    u8::from(p11 < u_y && u_y <= p11 + p21),
                    u8::from(u_y <= p10 + p20),
                ),
            };

            let id = format!("s{i}");
            let covariates = if stratified {
                vec![CovariateValue::Categorical(stratum.label.clone())]
            } else {
                vec![]
            };
            (
                IndividualRecord { id: id.clone(), arm, covariates, time_days, event },
                CounterfactualRow { id, dy1_a1_e1, dy2_a1_iso, dy2_a0_iso },
            )
        })
        .collect();

    let schema = if stratified {
        vec![CovariateColumn { name: "stratum".into(), kind: CovariateKind::Categorical }]
    } else {
        vec![]
    };
    let (records, panel) = rows.into_iter().unzip();
    Ok(DgmBoundsOutput { cohort: Cohort { records, schema }, panel, spec })
}

/// Empirical per-arm cumulative incidence through each interval, for
/// cohorts whose only censoring is administrative at the end of follow-up
/// (as emitted by the simulators here).
pub fn empirical_incidence_margins(
    cohort: &Cohort,
    spec: &IntervalSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k_max = spec.k_max();
    let mut counts = [vec![0u64; k_max], vec![0u64; k_max]];
    let mut totals = [0u64; 2];
    for record in &cohort.records {
        if record.arm > 1 {
            return Err(Error::Schema(format!("arm {} outside {{0, 1}}", record.arm)));
        }
        totals[record.arm as usize] += 1;
        if record.event == 1 {
            for k in 1..=k_max {
                let end = f64::from(spec.end_day(k).expect("k in range"));
                if record.time_days <= end {
                    counts[record.arm as usize][k - 1] += 1;
                }
            }
        }
    }
    for (arm, total) in totals.iter().enumerate() {
        if *total == 0 {
            return Err(Error::EmptyRiskSet(format!("arm {arm} has no subjects")));
        }
    }
    let margins = |arm: usize| {
        counts[arm].iter().map(|c| *c as f64 / totals[arm] as f64).collect::<Vec<f64>>()
    };
    Ok((margins(0), margins(1)))
}

/// Per-interval coefficients of the discrete-time logistic hazard
/// `expit(beta0 + beta_arm a + beta_l l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticIntervalParams {
    pub beta0: f64,
    pub beta_arm: f64,
    pub beta_l: f64,
}

/// Config for the logistic-hazard mechanism: `A ~ Ber(1/2)`,
/// `L ~ Unif[0,1]`, and per interval a censoring draw with probability
/// `censor_hazard` followed (if uncensored) by an event draw from the
/// logistic hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgmLogisticConfig {
    pub intervals: Vec<LogisticIntervalParams>,
    pub censor_hazard: f64,
    pub n: usize,
    pub seed: u64,
    pub interval_days: u32,
}

impl DgmLogisticConfig {
    pub fn spec(&self) -> IntervalSpec {
        IntervalSpec::equal_intervals(self.intervals.len(), self.interval_days)
    }

    fn ensure_valid(&self) -> Result<()> {
        validate_common(self.n, self.interval_days)?;
        if self.intervals.is_empty() {
            return Err(Error::InvalidConfig("at least one interval required".into()));
        }
        if !(0.0..1.0).contains(&self.censor_hazard) {
            return Err(Error::InvalidProbabilities(format!(
                "censoring hazard {} outside [0, 1)",
                self.censor_hazard
            )));
        }
        for params in &self.intervals {
            for (name, b) in
                [("beta0", params.beta0), ("beta_arm", params.beta_arm), ("beta_l", params.beta_l)]
            {
                if !b.is_finite() {
                    return Err(Error::InvalidConfig(format!("{name} = {b} is not finite")));
                }
            }
        }
        Ok(())
    }

    /// True hazard `expit(beta0 + beta_arm a + beta_l l)` per interval,
    /// `[placebo, vaccine]` at covariate value `l`.
    pub fn true_interval_hazards(&self, l: f64) -> Vec<[f64; 2]> {
        self.intervals
            .iter()
            .map(|p| {
                [expit(p.beta0 + p.beta_l * l), expit(p.beta0 + p.beta_arm + p.beta_l * l)]
            })
            .collect()
    }

    /// True cumulative incidence through each interval per arm at `l`.
    pub fn true_incidence_paths(&self, l: f64) -> (Vec<f64>, Vec<f64>) {
        let mut y0 = Vec::with_capacity(self.intervals.len());
        let mut y1 = Vec::with_capacity(self.intervals.len());
        let (mut s0, mut s1) = (1.0, 1.0);
        for h in self.true_interval_hazards(l) {
            s0 *= 1.0 - h[0];
            s1 *= 1.0 - h[1];
            y0.push(1.0 - s0);
            y1.push(1.0 - s1);
        }
        (y0, y1)
    }
}

/// Simulates the logistic-hazard mechanism. Events are recorded on the
/// last day of their interval; a subject censored during interval `k`
/// leaves the risk set before contributing to it (time at the end of
/// interval `k-1`, or half a day after enrollment for `k = 1`).
pub fn simulate_dgm_logistic(cfg: &DgmLogisticConfig) -> Result<Cohort> {
    cfg.ensure_valid()?;
    let spec = cfg.spec();
    let k_max = spec.k_max();
    let end_days: Vec<f64> =
        (1..=k_max).map(|k| f64::from(spec.end_day(k).expect("k in range"))).collect();

    let records: Vec<IndividualRecord> = (0..cfg.n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = subject_rng(cfg.seed, i);
            let arm: u8 = if rng.gen::<f64>() < 0.5 { 1 } else { 0 };
            let l: f64 = rng.gen();
            let mut time_days = end_days[k_max - 1];
            let mut event = 0u8;
            for (idx, params) in cfg.intervals.iter().enumerate() {
                if rng.gen::<f64>() < cfg.censor_hazard {
                    time_days = if idx == 0 { 0.5 } else { end_days[idx - 1] };
                    break;
                }
                let hazard = expit(params.beta0 + params.beta_arm * f64::from(arm) + params.beta_l * l);
                if rng.gen::<f64>() < hazard {
                    time_days = end_days[idx];
                    event = 1;
                    break;
                }
            }
            IndividualRecord {
                id: format!("s{i}"),
                arm,
                covariates: vec![CovariateValue::Numeric(l)],
                time_days,
                event,
            }
        })
        .collect();

    Ok(Cohort {
        records,
        schema: vec![CovariateColumn { name: "l".into(), kind: CovariateKind::Numeric }],
    })
}

/// How the vaccine acts on per-exposure transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtectionModel {
    /// Per-exposure transmission multiplied by `1 - vaccine_effect`.
    Leaky,
    /// Fraction `vaccine_effect` of the vaccinated is fully immune.
    AllOrNothing,
}

impl ProtectionModel {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtectionModel::Leaky => "leaky",
            ProtectionModel::AllOrNothing => "all_or_nothing",
        }
    }
}

/// Two-point latent multiplier: `multiplier` with probability `prob`,
/// otherwise 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointHeterogeneity {
    pub multiplier: f64,
    pub prob: f64,
}

/// Config for the exposure mechanism. Per interval a subject is exposed
/// with probability `exposure_prob[k-1]` (scaled by the latent exposure
/// multiplier); an exposure infects with probability
/// `min(1, transmission * susceptibility multiplier)`, attenuated by the
/// protection model in the vaccine arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgmExposureConfig {
    pub exposure_prob: Vec<f64>,
    pub transmission: f64,
    pub vaccine_effect: f64,
    pub protection: ProtectionModel,
    #[serde(default)]
    pub susceptibility: Option<TwoPointHeterogeneity>,
    #[serde(default)]
    pub exposure_heterogeneity: Option<TwoPointHeterogeneity>,
    pub p_treat: f64,
    pub n: usize,
    pub seed: u64,
    pub interval_days: u32,
}

/// Closed-form truth for the exposure mechanism: the challenge effect
/// under a single controlled exposure, and the conditional per-interval
/// observed VE the depletion process produces.
#[derive(Debug, Clone, PartialEq)]
pub struct DgmExposureTruth {
    /// Same in every interval: the protection parameter under either model.
    pub ve_challenge: f64,
    /// `1 - h_{k,1}/h_{k,0}` among survivors; `None` when the placebo
    /// hazard vanishes.
    pub ve_k_obs: Vec<Option<f64>>,
    /// Expected cumulative incidence per arm through each interval.
    pub incidence: [Vec<f64>; 2],
}

struct LatentType {
    weight: f64,
    susceptibility: f64,
    exposure: f64,
    protected: bool,
}

impl DgmExposureConfig {
    pub fn spec(&self) -> IntervalSpec {
        IntervalSpec::equal_intervals(self.exposure_prob.len(), self.interval_days)
    }

    fn ensure_valid(&self) -> Result<()> {
        validate_common(self.n, self.interval_days)?;
        if self.exposure_prob.is_empty() {
            return Err(Error::InvalidConfig("at least one interval required".into()));
        }
        for (idx, e) in self.exposure_prob.iter().enumerate() {
            validate_probability(&format!("exposure_prob[{}]", idx + 1), *e)?;
        }
        validate_probability("transmission", self.transmission)?;
        validate_probability("vaccine_effect", self.vaccine_effect)?;
        if !(self.p_treat > 0.0 && self.p_treat < 1.0) {
            return Err(Error::InvalidProbabilities(format!(
                "p_treat = {} outside (0, 1)",
                self.p_treat
            )));
        }
        for (name, h) in [
            ("susceptibility", self.susceptibility),
            ("exposure_heterogeneity", self.exposure_heterogeneity),
        ] {
            if let Some(tp) = h {
                validate_probability(&format!("{name}.prob"), tp.prob)?;
                if !(tp.multiplier >= 0.0 && tp.multiplier.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "{name}.multiplier = {} must be finite and nonnegative",
                        tp.multiplier
                    )));
                }
            }
        }
        Ok(())
    }

    fn infection_prob(&self, susceptibility: f64, arm: u8, protected: bool) -> f64 {
        let base = (self.transmission * susceptibility).min(1.0);
        if arm == 0 {
            return base;
        }
        match self.protection {
            ProtectionModel::Leaky => base * (1.0 - self.vaccine_effect),
            ProtectionModel::AllOrNothing => {
                if protected {
                    0.0
                } else {
                    base
                }
            }
        }
    }

    /// Latent types for one arm with their population weights.
    fn latent_types(&self, arm: u8) -> Vec<LatentType> {
        let points = |h: Option<TwoPointHeterogeneity>| match h {
            Some(tp) if tp.prob > 0.0 => {
                if tp.prob >= 1.0 {
                    vec![(tp.multiplier, 1.0)]
                } else {
                    vec![(tp.multiplier, tp.prob), (1.0, 1.0 - tp.prob)]
                }
            }
            _ => vec![(1.0, 1.0)],
        };
        let protection_split: Vec<(bool, f64)> =
            if arm == 1 && self.protection == ProtectionModel::AllOrNothing {
                match self.vaccine_effect {
                    v if v <= 0.0 => vec![(false, 1.0)],
                    v if v >= 1.0 => vec![(true, 1.0)],
                    v => vec![(true, v), (false, 1.0 - v)],
                }
            } else {
                vec![(false, 1.0)]
            };
        let mut types = Vec::new();
        for (s, ws) in points(self.susceptibility) {
            for (e, we) in points(self.exposure_heterogeneity) {
                for (protected, wp) in &protection_split {
                    types.push(LatentType {
                        weight: ws * we * wp,
                        susceptibility: s,
                        exposure: e,
                        protected: *protected,
                    });
                }
            }
        }
        types
    }

    /// Closed-form truth by enumerating the finite latent types.
    pub fn analytic_truth(&self) -> Result<DgmExposureTruth> {
        self.ensure_valid()?;
        let k_max = self.exposure_prob.len();
        let mut incidence = [Vec::with_capacity(k_max), Vec::with_capacity(k_max)];
        let mut hazards = [Vec::with_capacity(k_max), Vec::with_capacity(k_max)];
        for arm in [0u8, 1u8] {
            let types = self.latent_types(arm);
            let mut survival: Vec<f64> = types.iter().map(|_| 1.0).collect();
            let mut cumulative = 0.0;
            for e_k in &self.exposure_prob {
                let mut increment = 0.0;
                let mut at_risk = 0.0;
                for (t, s) in types.iter().zip(survival.iter_mut()) {
                    let h = (e_k * t.exposure).min(1.0)
                        * self.infection_prob(t.susceptibility, arm, t.protected);
                    increment += t.weight * *s * h;
                    at_risk += t.weight * *s;
                    *s *= 1.0 - h;
                }
                cumulative += increment;
                incidence[arm as usize].push(cumulative);
                hazards[arm as usize]
                    .push(if at_risk > 0.0 { Some(increment / at_risk) } else { None });
            }
        }
        let ve_k_obs = hazards[0]
            .iter()
            .zip(&hazards[1])
            .map(|(h0, h1)| match (h0, h1) {
                (Some(h0), Some(h1)) if *h0 > 0.0 => Some(1.0 - h1 / h0),
                _ => None,
            })
            .collect();
        Ok(DgmExposureTruth { ve_challenge: self.vaccine_effect, ve_k_obs, incidence })
    }
}

/// Simulates the exposure mechanism and returns the cohort together with
/// its closed-form truth report.
pub fn simulate_dgm_exposure(cfg: &DgmExposureConfig) -> Result<(Cohort, DgmExposureTruth)> {
    let truth = cfg.analytic_truth()?;
    let spec = cfg.spec();
    let k_max = spec.k_max();
    let end_days: Vec<f64> =
        (1..=k_max).map(|k| f64::from(spec.end_day(k).expect("k in range"))).collect();

    let records: Vec<IndividualRecord> = (0..cfg.n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = subject_rng(cfg.seed, i);
            let arm: u8 = if rng.gen::<f64>() < cfg.p_treat { 1 } else { 0 };
            let draw_multiplier = |rng: &mut ChaCha8Rng, h: Option<TwoPointHeterogeneity>| {
                let u: f64 = rng.gen();
                match h {
                    Some(tp) if u < tp.prob => tp.multiplier,
                    _ => 1.0,
                }
            };
            let susceptibility = draw_multiplier(&mut rng, cfg.susceptibility);
            let exposure = draw_multiplier(&mut rng, cfg.exposure_heterogeneity);
            let protected = rng.gen::<f64>() < cfg.vaccine_effect;

            let infection = cfg.infection_prob(susceptibility, arm, protected);
            let mut time_days = end_days[k_max - 1];
            let mut event = 0u8;
            for (idx, e_k) in cfg.exposure_prob.iter().enumerate() {
                let exposed = rng.gen::<f64>() < (e_k * exposure).min(1.0);
                if exposed && rng.gen::<f64>() < infection {
                    time_days = end_days[idx];
                    event = 1;
                    break;
                }
            }
            IndividualRecord {
                id: format!("s{i}"),
                arm,
                covariates: vec![],
                time_days,
                event,
            }
        })
        .collect();

    Ok((Cohort { records, schema: vec![] }, truth))
}
