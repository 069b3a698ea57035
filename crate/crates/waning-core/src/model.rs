//! Domain types shared by estimation, inference, simulation, and io.
//!
//! Time convention: the day is the atomic unit. Day `d` occupies the
//! continuous interval `(d-1, d]`, so a subinterval running from
//! `start_day` to `end_day` inclusive covers `(start_day-1, end_day]` in
//! continuous time and lasts `end_day - start_day + 1` days. Person-time
//! is accumulated as the overlap of a subject's follow-up `(0, t]` with
//! those windows, which permits fractional days.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subinterval `(k, j)`: a run of consecutive days with its own
/// piecewise-constant hazard.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subinterval {
    pub j: usize,
    pub start_day: u32,
    pub end_day: u32,
}

impl Subinterval {
    /// Number of days covered, `end_day - start_day + 1`.
    pub fn duration_days(&self) -> f64 {
        (self.end_day as f64) - (self.start_day as f64) + 1.0
    }

    /// Continuous-time window `(lo, hi]` this subinterval occupies.
    pub fn window(&self) -> (f64, f64) {
        ((self.start_day as f64) - 1.0, self.end_day as f64)
    }
}

/// One analysis interval `k` and its subintervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub k: usize,
    pub subintervals: Vec<Subinterval>,
}

impl Interval {
    /// First day of the interval.
    pub fn start_day(&self) -> u32 {
        self.subintervals.first().map_or(0, |s| s.start_day)
    }

    /// Last day of the interval.
    pub fn end_day(&self) -> u32 {
        self.subintervals.last().map_or(0, |s| s.end_day)
    }
}

/// Partition of follow-up into `K >= 2` analysis intervals, each split into
/// contiguous subintervals of known day lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub intervals: Vec<Interval>,
}

impl IntervalSpec {
    /// Spec with `k` equal intervals of `days` days each, one subinterval
    /// per interval, starting at day 1.
    pub fn equal_intervals(k: usize, days: u32) -> IntervalSpec {
        let intervals = (1..=k)
            .map(|ki| Interval {
                k: ki,
                subintervals: vec![Subinterval {
                    j: 1,
                    start_day: (ki as u32 - 1) * days + 1,
                    end_day: ki as u32 * days,
                }],
            })
            .collect();
        IntervalSpec { intervals }
    }

    /// Number of analysis intervals.
    pub fn k_max(&self) -> usize {
        self.intervals.len()
    }

    pub fn interval(&self, k: usize) -> Option<&Interval> {
        self.intervals.iter().find(|iv| iv.k == k)
    }

    /// Last day of interval `k`, the prediction time for cumulative
    /// incidence at the end of that interval.
    pub fn end_day(&self, k: usize) -> Option<u32> {
        self.interval(k).map(Interval::end_day)
    }

    /// Errors with the joined violation list unless the spec is valid.
    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_interval_spec(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidIntervalSpec(violations.join("; ")))
        }
    }
}

/// Checks the interval partition; returns one message per violation, empty
/// when the spec is well formed.
pub fn validate_interval_spec(spec: &IntervalSpec) -> Vec<String> {
    let mut violations = Vec::new();
    if spec.intervals.len() < 2 {
        violations.push("K >= 2 required".to_string());
    }
    let mut prev_end: Option<u32> = None;
    for (pos, interval) in spec.intervals.iter().enumerate() {
        if interval.k != pos + 1 {
            violations.push(format!(
                "interval at position {} has index k={}, expected {}",
                pos + 1,
                interval.k,
                pos + 1
            ));
        }
        if interval.subintervals.is_empty() {
            violations.push(format!("interval k={} has no subintervals", interval.k));
            continue;
        }
        for (jpos, sub) in interval.subintervals.iter().enumerate() {
            if sub.j != jpos + 1 {
                violations.push(format!(
                    "subinterval at position {} of interval k={} has index j={}, expected {}",
                    jpos + 1,
                    interval.k,
                    sub.j,
                    jpos + 1
                ));
            }
            if sub.start_day < 1 {
                violations.push(format!(
                    "subinterval (k={}, j={}) starts before day 1",
                    interval.k, sub.j
                ));
            }
            if sub.end_day < sub.start_day {
                violations.push(format!(
                    "subinterval (k={}, j={}) has end_day {} before start_day {}",
                    interval.k, sub.j, sub.end_day, sub.start_day
                ));
            }
            if let Some(end) = prev_end {
                if sub.start_day != end + 1 {
                    violations.push(format!(
                        "contiguity violation at (k={}, j={}): starts on day {}, previous ended on day {}",
                        interval.k, sub.j, sub.start_day, end
                    ));
                }
            }
            prev_end = Some(sub.end_day);
        }
    }
    violations
}

/// Event count and person-time for one `(k, j, arm[, stratum])` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryCell {
    pub k: usize,
    pub j: usize,
    /// 0 = placebo, 1 = vaccine.
    pub arm: u8,
    pub stratum: Option<String>,
    pub events: u64,
    /// Person-days at risk within the subinterval.
    pub person_time: f64,
}

impl SummaryCell {
    /// `k=.., j=.., arm=.., stratum=..` identifier used in messages.
    pub fn key(&self) -> String {
        match &self.stratum {
            Some(s) => format!("k={}, j={}, arm={}, stratum={}", self.k, self.j, self.arm, s),
            None => format!("k={}, j={}, arm={}", self.k, self.j, self.arm),
        }
    }
}

/// Summary-level trial data: one cell per `(k, j, arm[, stratum])`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub spec: IntervalSpec,
    pub cells: Vec<SummaryCell>,
}

impl SummaryTable {
    /// Aggregates individual records into a marginal (stratum-free) summary
    /// table. Events are assigned to the subinterval whose day window
    /// contains the record's time; person-days are the overlap of `(0, t]`
    /// with each window. Events falling outside the partition contribute
    /// person-time only.
    pub fn from_cohort(cohort: &Cohort, spec: &IntervalSpec) -> Result<SummaryTable> {
        spec.ensure_valid()?;
        let mut cells = Vec::new();
        for interval in &spec.intervals {
            for sub in &interval.subintervals {
                let (lo, hi) = sub.window();
                for arm in [0u8, 1u8] {
                    let mut events = 0u64;
                    let mut person_time = 0.0;
                    for rec in cohort.records.iter().filter(|r| r.arm == arm) {
                        person_time += (rec.time_days.min(hi) - lo).max(0.0);
                        if rec.event == 1 && rec.time_days > lo && rec.time_days <= hi {
                            events += 1;
                        }
                    }
                    cells.push(SummaryCell {
                        k: interval.k,
                        j: sub.j,
                        arm,
                        stratum: None,
                        events,
                        person_time,
                    });
                }
            }
        }
        Ok(SummaryTable { spec: spec.clone(), cells })
    }

    /// Errors with the joined violation list unless the table is valid.
    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_summary_table(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSummaryTable(violations.join("; ")))
        }
    }

    /// Stratum labels present, in sorted order; `None` is the marginal table.
    pub fn strata(&self) -> Vec<Option<String>> {
        let set: BTreeSet<Option<String>> =
            self.cells.iter().map(|c| c.stratum.clone()).collect();
        set.into_iter().collect()
    }
}

/// Checks table invariants: a valid spec, every `(k, j, arm)` covered
/// exactly once per stratum, integer-consistent cells, and positive
/// person-time wherever there are events.
pub fn validate_summary_table(table: &SummaryTable) -> Vec<String> {
    let mut violations = validate_interval_spec(&table.spec);
    let mut seen: BTreeMap<(usize, usize, u8, Option<String>), usize> = BTreeMap::new();
    for cell in &table.cells {
        if table
            .spec
            .interval(cell.k)
            .and_then(|iv| iv.subintervals.iter().find(|s| s.j == cell.j))
            .is_none()
        {
            violations.push(format!("cell ({}) not in the interval spec", cell.key()));
        }
        if cell.arm > 1 {
            violations.push(format!("cell ({}) has arm outside {{0,1}}", cell.key()));
        }
        if !cell.person_time.is_finite() || cell.person_time < 0.0 {
            violations.push(format!("cell ({}) has invalid person-time", cell.key()));
        }
        if cell.events > 0 && cell.person_time <= 0.0 {
            violations.push(format!(
                "cell ({}) has {} events but zero person-time",
                cell.key(),
                cell.events
            ));
        }
        *seen
            .entry((cell.k, cell.j, cell.arm, cell.stratum.clone()))
            .or_insert(0) += 1;
    }
    for ((k, j, arm, stratum), count) in &seen {
        if *count > 1 {
            violations.push(format!(
                "duplicate cell (k={k}, j={j}, arm={arm}{})",
                stratum
                    .as_ref()
                    .map(|s| format!(", stratum={s}"))
                    .unwrap_or_default()
            ));
        }
    }
    let strata: BTreeSet<Option<String>> =
        seen.keys().map(|(_, _, _, s)| s.clone()).collect();
    for stratum in &strata {
        for interval in &table.spec.intervals {
            for sub in &interval.subintervals {
                for arm in [0u8, 1u8] {
                    if !seen.contains_key(&(interval.k, sub.j, arm, stratum.clone())) {
                        violations.push(format!(
                            "missing cell (k={}, j={}, arm={arm}{})",
                            interval.k,
                            sub.j,
                            stratum
                                .as_ref()
                                .map(|s| format!(", stratum={s}"))
                                .unwrap_or_default()
                        ));
                    }
                }
            }
        }
    }
    violations
}

/// Kind of a covariate column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovariateKind {
    Numeric,
    Categorical,
}

/// Name and kind of one covariate column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateColumn {
    pub name: String,
    pub kind: CovariateKind,
}

/// One covariate value; variant must match the column's kind.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateValue {
    Numeric(f64),
    Categorical(String),
}

/// One trial participant.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualRecord {
    pub id: String,
    /// 0 = placebo, 1 = vaccine.
    pub arm: u8,
    /// Values aligned with the cohort's covariate schema.
    pub covariates: Vec<CovariateValue>,
    /// Event or censoring time in days; must be positive.
    pub time_days: f64,
    /// 1 = outcome observed at `time_days`, 0 = censored there.
    pub event: u8,
}

/// Individual-level trial data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cohort {
    pub records: Vec<IndividualRecord>,
    pub schema: Vec<CovariateColumn>,
}

impl Cohort {
    /// Errors unless both arms are nonempty and records match the schema.
    pub fn ensure_estimable(&self) -> Result<()> {
        for arm in [0u8, 1u8] {
            if !self.records.iter().any(|r| r.arm == arm) {
                return Err(Error::EmptyRiskSet(format!("arm {arm} has no subjects")));
            }
        }
        for rec in &self.records {
            if rec.covariates.len() != self.schema.len() {
                return Err(Error::Schema(format!(
                    "record {} has {} covariates, schema has {}",
                    rec.id,
                    rec.covariates.len(),
                    self.schema.len()
                )));
            }
        }
        Ok(())
    }
}

/// Covariate value at which conditional estimates are evaluated: one entry
/// per covariate column, textual for categorical columns.
pub type CovariateProfile = BTreeMap<String, String>;

/// Mapping from cohort covariates to numeric design-matrix columns.
/// Numeric columns pass through; categorical columns are one-hot encoded
/// against their sorted levels with the first level as baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignInfo {
    columns: Vec<DesignColumn>,
}

#[derive(Debug, Clone, PartialEq)]
enum DesignColumn {
    Numeric { name: String, index: usize },
    Level { name: String, index: usize, label: String },
}

impl DesignInfo {
    /// Builds the encoding from the covariate values present in `cohort`.
    pub fn from_cohort(cohort: &Cohort) -> DesignInfo {
        let mut columns = Vec::new();
        for (index, col) in cohort.schema.iter().enumerate() {
            match col.kind {
                CovariateKind::Numeric => columns.push(DesignColumn::Numeric {
                    name: col.name.clone(),
                    index,
                }),
                CovariateKind::Categorical => {
                    let levels: BTreeSet<String> = cohort
                        .records
                        .iter()
                        .filter_map(|r| match &r.covariates[index] {
                            CovariateValue::Categorical(s) => Some(s.clone()),
                            CovariateValue::Numeric(_) => None,
                        })
                        .collect();
                    for label in levels.into_iter().skip(1) {
                        columns.push(DesignColumn::Level {
                            name: col.name.clone(),
                            index,
                            label,
                        });
                    }
                }
            }
        }
        DesignInfo { columns }
    }

    /// Number of covariate-derived design columns (excludes intercept/arm).
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Human-readable design column names.
    pub fn names(&self) -> Vec<String> {
        self.columns
            .iter()
            .map(|c| match c {
                DesignColumn::Numeric { name, .. } => name.clone(),
                DesignColumn::Level { name, label, .. } => format!("{name}={label}"),
            })
            .collect()
    }

    /// Encodes one record's covariates.
    pub fn encode_record(&self, rec: &IndividualRecord) -> Result<Vec<f64>> {
        self.columns
            .iter()
            .map(|c| match c {
                DesignColumn::Numeric { name, index } => match &rec.covariates[*index] {
                    CovariateValue::Numeric(v) => Ok(*v),
                    CovariateValue::Categorical(_) => Err(Error::Schema(format!(
                        "record {}: column `{name}` expected numeric",
                        rec.id
                    ))),
                },
                DesignColumn::Level { name, index, label } => match &rec.covariates[*index] {
                    CovariateValue::Categorical(s) => Ok(f64::from(s == label)),
                    CovariateValue::Numeric(_) => Err(Error::Schema(format!(
                        "record {}: column `{name}` expected categorical",
                        rec.id
                    ))),
                },
            })
            .collect()
    }

    /// Encodes a covariate profile; every covariate column must be given.
    pub fn encode_profile(
        &self,
        schema: &[CovariateColumn],
        profile: &CovariateProfile,
    ) -> Result<Vec<f64>> {
        for col in schema {
            if !profile.contains_key(&col.name) {
                return Err(Error::InvalidConfig(format!(
                    "profile missing covariate `{}`",
                    col.name
                )));
            }
        }
        for name in profile.keys() {
            if !schema.iter().any(|c| &c.name == name) {
                return Err(Error::InvalidConfig(format!(
                    "profile names unknown covariate `{name}`"
                )));
            }
        }
        self.columns
            .iter()
            .map(|c| match c {
                DesignColumn::Numeric { name, .. } => {
                    let raw = &profile[name];
                    raw.parse::<f64>().map_err(|_| {
                        Error::InvalidConfig(format!(
                            "profile value `{raw}` for `{name}` is not numeric"
                        ))
                    })
                }
                DesignColumn::Level { name, label, .. } => {
                    Ok(f64::from(&profile[name] == label))
                }
            })
            .collect()
    }
}

/// Per-subinterval rate estimate for one `(k, j, arm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCell {
    pub k: usize,
    pub j: usize,
    pub arm: u8,
    /// Events per person-day.
    pub lambda: f64,
    /// Estimated variance of `lambda`; `None` when no events were observed.
    pub variance: Option<f64>,
    pub duration_days: f64,
    pub events: u64,
    pub person_time: f64,
}

/// Cumulative hazard over one `(k, arm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardCell {
    pub k: usize,
    pub arm: u8,
    pub value: f64,
    /// `None` when any contributing rate variance is unavailable.
    pub variance: Option<f64>,
}

/// Rates and cumulative hazards for one stratum.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StratumHazards {
    pub rates: Vec<RateCell>,
    pub intervals: Vec<HazardCell>,
}

impl StratumHazards {
    pub fn interval(&self, k: usize, arm: u8) -> Option<&HazardCell> {
        self.intervals.iter().find(|c| c.k == k && c.arm == arm)
    }
}

/// Piecewise-constant hazard estimates per stratum; the `None` key holds the
/// marginal (stratum-free) analysis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CumulativeHazards {
    pub k_max: usize,
    pub strata: BTreeMap<Option<String>, StratumHazards>,
}

impl CumulativeHazards {
    pub fn stratum(&self, label: Option<&str>) -> Option<&StratumHazards> {
        self.strata.get(&label.map(str::to_string))
    }
}

/// A point estimate with optional confidence limits. One-sided intervals
/// carry `None` on the unreported side.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCi {
    pub point: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl PointCi {
    pub fn point_only(point: f64) -> PointCi {
        PointCi { point, lower: None, upper: None }
    }
}

/// How a `WaningEstimate` was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMethod {
    SummaryDelta,
    LogisticBootstrap,
    CoxBootstrap,
}

impl EstimationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimationMethod::SummaryDelta => "summary-delta",
            EstimationMethod::LogisticBootstrap => "logistic-bootstrap",
            EstimationMethod::CoxBootstrap => "cox-bootstrap",
        }
    }
}

/// Which second-interval observed-VE contrast a `WaningEstimate` reports:
/// the hazard ratio `1 - L21/L20`, or the incidence contrast conditional on
/// being event-free at the end of interval 1. The two coincide up to
/// first order in the hazards under rare events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ve2Definition {
    HazardRatio,
    Conditional,
}

impl Ve2Definition {
    pub fn as_str(self) -> &'static str {
        match self {
            Ve2Definition::HazardRatio => "hazard-ratio",
            Ve2Definition::Conditional => "conditional",
        }
    }
}

/// Bookkeeping from a bootstrap run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapMeta {
    pub resamples: usize,
    /// Resamples that produced a usable estimate.
    pub used: usize,
    pub failed: usize,
    pub seed: u64,
}

/// The six two-interval point estimates with their confidence intervals.
///
/// `ve1` is both the observed and the challenge vaccine efficacy for
/// interval 1. `l2`/`u2` bound the interval-2 challenge effect, and
/// `l_psi`/`u_psi` bound the waning ratio; `psi_obs` is the naive waning
/// contrast. Two-sided intervals attach to `ve1`, `ve2_obs`, `psi_obs`;
/// bounds carry one-sided intervals (lower limit only for `l2`/`l_psi`,
/// upper limit only for `u2`/`u_psi`).
#[derive(Debug, Clone, PartialEq)]
pub struct WaningEstimate {
    pub ve1: PointCi,
    pub ve2_obs: PointCi,
    pub l2: PointCi,
    pub u2: PointCi,
    pub l_psi: PointCi,
    pub u_psi: PointCi,
    pub psi_obs: Option<PointCi>,
    /// Confidence level; `None` until intervals are attached.
    pub alpha: Option<f64>,
    pub method: EstimationMethod,
    pub stratum: Option<String>,
    pub ve2_definition: Ve2Definition,
    /// Names of quantities whose raw value is degenerate (non-finite or
    /// produced by a vanishing denominator). Values are never clamped.
    pub degenerate: Vec<String>,
    pub warnings: Vec<String>,
    pub bootstrap: Option<BootstrapMeta>,
}

impl WaningEstimate {
    /// Residuals of the algebraic identities
    /// `l_psi * (1 - l2) = 1 - ve1` and `u_psi * (1 - u2) = 1 - ve1`,
    /// which hold for every estimate this library emits.
    pub fn identity_residuals(&self) -> [f64; 2] {
        let rhs = 1.0 - self.ve1.point;
        [
            (self.l_psi.point * (1.0 - self.l2.point) - rhs).abs(),
            (self.u_psi.point * (1.0 - self.u2.point) - rhs).abs(),
        ]
    }
}

/// Backend used for the K-interval bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KBackend {
    /// Product-form cumulative incidences, exact for discrete hazards.
    ExactProduct,
    /// Cumulative-hazard sums, valid under rare events.
    RareEvent,
}

impl KBackend {
    pub fn as_str(self) -> &'static str {
        match self {
            KBackend::ExactProduct => "exact-product",
            KBackend::RareEvent => "rare-event",
        }
    }
}

/// Bounds for one interval `k >= 2`; a failed interval carries its error
/// message without aborting the others.
#[derive(Debug, Clone, PartialEq)]
pub struct KBoundRow {
    pub k: usize,
    pub l: Option<PointCi>,
    pub u: Option<PointCi>,
    pub ve_obs: Option<PointCi>,
    pub error: Option<String>,
}

/// Per-interval bounds over `K >= 2` intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct KBoundsEstimate {
    pub rows: Vec<KBoundRow>,
    pub backend: KBackend,
    pub alpha: Option<f64>,
    pub method: EstimationMethod,
    pub stratum: Option<String>,
    pub warnings: Vec<String>,
    pub bootstrap: Option<BootstrapMeta>,
}
