//! File formats: strict CSV schemas for summary tables, cohorts, and
//! counterfactual panels; JSON interval specs; and JSON/CSV reports.
//!
//! All files are UTF-8 with LF newlines, comma separators, and `.` decimal
//! points. Reports serialize floats with 17 significant digits so reading
//! a written report restores every value exactly; one-sided confidence
//! limits appear as nulls.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::inference::{WaningDirection, WaningTestResult};
use crate::model::{
    BootstrapMeta, Cohort, CovariateColumn, CovariateKind, CovariateValue, EstimationMethod,
    IndividualRecord, IntervalSpec, KBackend, KBoundRow, KBoundsEstimate, PointCi, SummaryCell,
    SummaryTable, Ve2Definition, WaningEstimate,
};
use crate::simulate::CounterfactualRow;

const SUMMARY_HEADER: [&str; 7] =
    ["k", "j", "arm", "stratum", "events", "person_time", "duration_days"];
const COHORT_HEADER: [&str; 4] = ["id", "arm", "time_days", "event"];
const COUNTERFACTUAL_HEADER: [&str; 4] = ["id", "dy1_a1_e1", "dy2_a1_iso", "dy2_a0_iso"];

fn io_err(message: String) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::Other, message))
}

fn parse_cell<T: FromStr>(raw: &str, line: usize, column: &str, expected: &str) -> Result<T>
where
    T::Err: Display,
{
    raw.parse().map_err(|e| Error::Parse {
        row: line,
        column: column.to_string(),
        message: format!("`{raw}` is not {expected}: {e}"),
    })
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_path(path)
        .map_err(|e| io_err(format!("{}: {e}", path.display())))
}

fn check_header(actual: &csv::StringRecord, expected: &[&str], path: &Path) -> Result<()> {
    let actual: Vec<&str> = actual.iter().collect();
    if actual != expected {
        return Err(Error::Schema(format!(
            "{}: header is `{}`, expected `{}`",
            path.display(),
            actual.join(","),
            expected.join(",")
        )));
    }
    Ok(())
}

fn field<'r>(record: &'r csv::StringRecord, idx: usize, column: &str) -> Result<&'r str> {
    record.get(idx).ok_or_else(|| Error::Parse {
        row: record_line(record),
        column: column.to_string(),
        message: "missing field".into(),
    })
}

/// Reads a summary table whose header is
/// `k,j,arm,stratum,events,person_time,duration_days`. Parsing is strict:
/// counts must be integers, times finite nonnegative decimals, and each
/// row's `duration_days` must agree with the interval spec.
pub fn read_summary_csv(path: &Path, spec: &IntervalSpec) -> Result<SummaryTable> {
    spec.ensure_valid()?;
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| io_err(e.to_string()))?.clone();
    check_header(&headers, &SUMMARY_HEADER, path)?;

    let mut cells: Vec<SummaryCell> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for row in reader.records() {
        let record = row.map_err(|e| io_err(e.to_string()))?;
        let line = record_line(&record);
        let k: usize = parse_cell(field(&record, 0, "k")?, line, "k", "an interval index")?;
        let j: usize = parse_cell(field(&record, 1, "j")?, line, "j", "a subinterval index")?;
        let arm: u8 = parse_cell(field(&record, 2, "arm")?, line, "arm", "0 or 1")?;
        if arm > 1 {
            return Err(Error::Parse {
                row: line,
                column: "arm".into(),
                message: format!("arm must be 0 or 1, got {arm}"),
            });
        }
        let stratum_raw = field(&record, 3, "stratum")?;
        let stratum =
            if stratum_raw.is_empty() { None } else { Some(stratum_raw.to_string()) };
        let events: u64 =
            parse_cell(field(&record, 4, "events")?, line, "events", "a nonnegative integer")?;
        let person_time: f64 = parse_cell(
            field(&record, 5, "person_time")?,
            line,
            "person_time",
            "a decimal number",
        )?;
        if !(person_time.is_finite() && person_time >= 0.0) {
            return Err(Error::Parse {
                row: line,
                column: "person_time".into(),
                message: format!("person-time must be finite and nonnegative, got {person_time}"),
            });
        }
        let duration: f64 = parse_cell(
            field(&record, 6, "duration_days")?,
            line,
            "duration_days",
            "a decimal number",
        )?;

        let subinterval = spec
            .interval(k)
            .and_then(|iv| iv.subintervals.iter().find(|s| s.j == j))
            .ok_or_else(|| {
                Error::Schema(format!("subinterval (k={k}, j={j}) is not in the interval spec"))
            })?;
        if (subinterval.duration_days() - duration).abs() > 1e-9 {
            return Err(Error::Schema(format!(
                "duration_days for (k={k}, j={j}) is {duration}, but the interval spec says {}",
                subinterval.duration_days()
            )));
        }
        if !seen.insert((k, j, arm, stratum.clone())) {
            let cell = SummaryCell { k, j, arm, stratum, events: 0, person_time: 0.0 };
            return Err(Error::Schema(format!("duplicate cell ({})", cell.key())));
        }
        cells.push(SummaryCell { k, j, arm, stratum, events, person_time });
    }
    Ok(SummaryTable { spec: spec.clone(), cells })
}

/// Writes a summary table in the schema read by [`read_summary_csv`].
pub fn write_summary_csv(table: &SummaryTable, path: &Path) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    writer.write_record(SUMMARY_HEADER).map_err(|e| io_err(e.to_string()))?;
    let mut cells: Vec<&SummaryCell> = table.cells.iter().collect();
    cells.sort_by(|a, b| {
        (&a.stratum, a.k, a.j, a.arm).cmp(&(&b.stratum, b.k, b.j, b.arm))
    });
    for cell in cells {
        let duration = table
            .spec
            .interval(cell.k)
            .and_then(|iv| iv.subintervals.iter().find(|s| s.j == cell.j))
            .map(|s| s.duration_days())
            .ok_or_else(|| {
                Error::InvalidSummaryTable(format!(
                    "cell ({}) is not in the interval spec",
                    cell.key()
                ))
            })?;
        writer
            .write_record([
                cell.k.to_string(),
                cell.j.to_string(),
                cell.arm.to_string(),
                cell.stratum.clone().unwrap_or_default(),
                cell.events.to_string(),
                cell.person_time.to_string(),
                duration.to_string(),
            ])
            .map_err(|e| io_err(e.to_string()))?;
    }
    writer.flush().map_err(|e| io_err(e.to_string()))?;
    Ok(())
}

/// Reads individual records with header `id,arm,time_days,event` plus the
/// declared covariate columns (matched by name; undeclared extra columns
/// are ignored).
pub fn read_cohort_csv(path: &Path, covariates: &[CovariateColumn]) -> Result<Cohort> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| io_err(e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let index_of = |name: &str| names.iter().position(|h| *h == name);
    let mut required = Vec::with_capacity(COHORT_HEADER.len());
    for name in COHORT_HEADER {
        required.push(index_of(name).ok_or_else(|| {
            Error::Schema(format!("{}: missing required column `{name}`", path.display()))
        })?);
    }
    let mut covariate_idx = Vec::with_capacity(covariates.len());
    for column in covariates {
        covariate_idx.push(index_of(&column.name).ok_or_else(|| {
            Error::Schema(format!(
                "{}: covariate column `{}` not found in the file",
                path.display(),
                column.name
            ))
        })?);
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| io_err(e.to_string()))?;
        let line = record_line(&record);
        let id = field(&record, required[0], "id")?.to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                row: line,
                column: "id".into(),
                message: "empty subject id".into(),
            });
        }
        let arm: u8 = parse_cell(field(&record, required[1], "arm")?, line, "arm", "0 or 1")?;
        if arm > 1 {
            return Err(Error::Parse {
                row: line,
                column: "arm".into(),
                message: format!("arm must be 0 or 1, got {arm}"),
            });
        }
        let time_days: f64 = parse_cell(
            field(&record, required[2], "time_days")?,
            line,
            "time_days",
            "a decimal number",
        )?;
        if !(time_days.is_finite() && time_days > 0.0) {
            return Err(Error::Parse {
                row: line,
                column: "time_days".into(),
                message: format!("time must be finite and positive, got {time_days}"),
            });
        }
        let event: u8 =
            parse_cell(field(&record, required[3], "event")?, line, "event", "0 or 1")?;
        if event > 1 {
            return Err(Error::Parse {
                row: line,
                column: "event".into(),
                message: format!("event must be 0 or 1, got {event}"),
            });
        }
        let mut values = Vec::with_capacity(covariates.len());
        for (column, idx) in covariates.iter().zip(&covariate_idx) {
            let raw = field(&record, *idx, &column.name)?;
            values.push(match column.kind {
                CovariateKind::Numeric => {
                    let value: f64 =
                        parse_cell(raw, line, &column.name, "a decimal number")?;
                    if !value.is_finite() {
                        return Err(Error::Parse {
                            row: line,
                            column: column.name.clone(),
                            message: format!("covariate must be finite, got {value}"),
                        });
                    }
                    CovariateValue::Numeric(value)
                }
                CovariateKind::Categorical => {
                    if raw.is_empty() {
                        return Err(Error::Parse {
                            row: line,
                            column: column.name.clone(),
                            message: "empty categorical value".into(),
                        });
                    }
                    CovariateValue::Categorical(raw.to_string())
                }
            });
        }
        records.push(IndividualRecord { id, arm, covariates: values, time_days, event });
    }
    Ok(Cohort { records, schema: covariates.to_vec() })
}

/// Writes a cohort in the schema read by [`read_cohort_csv`].
pub fn write_cohort_csv(cohort: &Cohort, path: &Path) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    let mut header: Vec<&str> = COHORT_HEADER.to_vec();
    header.extend(cohort.schema.iter().map(|c| c.name.as_str()));
    writer.write_record(&header).map_err(|e| io_err(e.to_string()))?;
    for record in &cohort.records {
        let mut row = vec![
            record.id.clone(),
            record.arm.to_string(),
            record.time_days.to_string(),
            record.event.to_string(),
        ];
        for value in &record.covariates {
            row.push(match value {
                CovariateValue::Numeric(v) => v.to_string(),
                CovariateValue::Categorical(s) => s.clone(),
            });
        }
        writer.write_record(&row).map_err(|e| io_err(e.to_string()))?;
    }
    writer.flush().map_err(|e| io_err(e.to_string()))?;
    Ok(())
}

/// Writes the counterfactual panel (`id,dy1_a1_e1,dy2_a1_iso,dy2_a0_iso`).
pub fn write_counterfactual_csv(panel: &[CounterfactualRow], path: &Path) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    writer.write_record(COUNTERFACTUAL_HEADER).map_err(|e| io_err(e.to_string()))?;
    for row in panel {
        writer
            .write_record([
                row.id.clone(),
                row.dy1_a1_e1.to_string(),
                row.dy2_a1_iso.to_string(),
                row.dy2_a0_iso.to_string(),
            ])
            .map_err(|e| io_err(e.to_string()))?;
    }
    writer.flush().map_err(|e| io_err(e.to_string()))?;
    Ok(())
}

/// Reads a counterfactual panel written by [`write_counterfactual_csv`].
pub fn read_counterfactual_csv(path: &Path) -> Result<Vec<CounterfactualRow>> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| io_err(e.to_string()))?.clone();
    check_header(&headers, &COUNTERFACTUAL_HEADER, path)?;
    let mut rows = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| io_err(e.to_string()))?;
        let line = record_line(&record);
        let id = field(&record, 0, "id")?.to_string();
        let mut bits = [0u8; 3];
        for (slot, (idx, column)) in
            bits.iter_mut().zip([(1, "dy1_a1_e1"), (2, "dy2_a1_iso"), (3, "dy2_a0_iso")])
        {
            let value: u8 = parse_cell(field(&record, idx, column)?, line, column, "0 or 1")?;
            if value > 1 {
                return Err(Error::Parse {
                    row: line,
                    column: column.into(),
                    message: format!("indicator must be 0 or 1, got {value}"),
                });
            }
            *slot = value;
        }
        rows.push(CounterfactualRow {
            id,
            dy1_a1_e1: bits[0],
            dy2_a1_iso: bits[1],
            dy2_a0_iso: bits[2],
        });
    }
    Ok(rows)
}

/// Reads an interval spec from JSON
/// (`{"intervals": [{"k": 1, "subintervals": [{"j": 1, "start_day": 1,
/// "end_day": 30}]}, ...]}`) and validates it.
pub fn read_interval_spec_json(path: &Path) -> Result<IntervalSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    let spec: IntervalSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    spec.ensure_valid()?;
    Ok(spec)
}

/// Writes an interval spec as JSON.
pub fn write_interval_spec_json(spec: &IntervalSpec, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(spec).expect("interval specs always serialize");
    std::fs::write(path, text).map_err(|e| io_err(format!("{}: {e}", path.display())))
}

/// Any document the estimation pipeline can emit.
#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Waning(WaningEstimate),
    KBounds(KBoundsEstimate),
    Test(WaningTestResult),
}

/// Output encoding for [`write_report`]. CSV is export-only; JSON round-trips
/// through [`read_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

fn json_number(value: f64, field: &str, warnings: &mut Vec<String>) -> Value {
    if value.is_finite() {
        Value::Number(
            format!("{value:.16e}").parse().expect("formatted floats are valid JSON numbers"),
        )
    } else {
        warnings.push(format!("{field} is not finite ({value}); serialized as null"));
        Value::Null
    }
}

fn json_opt_number(value: Option<f64>, field: &str, warnings: &mut Vec<String>) -> Value {
    match value {
        Some(v) => json_number(v, field, warnings),
        None => Value::Null,
    }
}

fn json_point_ci(ci: &PointCi, name: &str, warnings: &mut Vec<String>) -> Value {
    let mut map = Map::new();
    map.insert("point".into(), json_number(ci.point, &format!("{name}.point"), warnings));
    map.insert("lower".into(), json_opt_number(ci.lower, &format!("{name}.lower"), warnings));
    map.insert("upper".into(), json_opt_number(ci.upper, &format!("{name}.upper"), warnings));
    Value::Object(map)
}

fn json_strings(items: &[String]) -> Value {
    Value::Array(items.iter().map(|s| Value::String(s.clone())).collect())
}

fn json_bootstrap(meta: &Option<BootstrapMeta>) -> Value {
    match meta {
        None => Value::Null,
        Some(m) => {
            let mut map = Map::new();
            map.insert("resamples".into(), Value::from(m.resamples as u64));
            map.insert("used".into(), Value::from(m.used as u64));
            map.insert("failed".into(), Value::from(m.failed as u64));
            map.insert("seed".into(), Value::from(m.seed));
            Value::Object(map)
        }
    }
}

fn waning_estimate_json(est: &WaningEstimate) -> Value {
    let mut warnings = est.warnings.clone();
    let mut map = Map::new();
    map.insert("type".into(), Value::String("waning-estimate".into()));
    map.insert("method".into(), Value::String(est.method.as_str().into()));
    map.insert("ve2_definition".into(), Value::String(est.ve2_definition.as_str().into()));
    map.insert(
        "stratum".into(),
        est.stratum.clone().map_or(Value::Null, Value::String),
    );
    map.insert("alpha".into(), {
        let mut scratch = Vec::new();
        json_opt_number(est.alpha, "alpha", &mut scratch)
    });
    for (name, ci) in [
        ("ve1", &est.ve1),
        ("ve2_obs", &est.ve2_obs),
        ("l2", &est.l2),
        ("u2", &est.u2),
        ("l_psi", &est.l_psi),
        ("u_psi", &est.u_psi),
    ] {
        map.insert(name.into(), json_point_ci(ci, name, &mut warnings));
    }
    map.insert(
        "psi_obs".into(),
        est.psi_obs
            .as_ref()
            .map_or(Value::Null, |ci| json_point_ci(ci, "psi_obs", &mut warnings)),
    );
    map.insert("degenerate".into(), json_strings(&est.degenerate));
    map.insert("warnings".into(), json_strings(&warnings));
    map.insert("bootstrap".into(), json_bootstrap(&est.bootstrap));
    Value::Object(map)
}

fn k_bounds_json(est: &KBoundsEstimate) -> Value {
    let mut warnings = est.warnings.clone();
    let mut rows = Vec::with_capacity(est.rows.len());
    for row in &est.rows {
        let mut map = Map::new();
        map.insert("k".into(), Value::from(row.k as u64));
        let name = |q: &str| format!("{q}[k={}]", row.k);
        for (quantity, ci) in [("l", &row.l), ("u", &row.u), ("ve_obs", &row.ve_obs)] {
            map.insert(
                quantity.into(),
                ci.as_ref()
                    .map_or(Value::Null, |ci| json_point_ci(ci, &name(quantity), &mut warnings)),
            );
        }
        map.insert("error".into(), row.error.clone().map_or(Value::Null, Value::String));
        rows.push(Value::Object(map));
    }
    let mut map = Map::new();
    map.insert("type".into(), Value::String("k-bounds".into()));
    map.insert("backend".into(), Value::String(est.backend.as_str().into()));
    map.insert("method".into(), Value::String(est.method.as_str().into()));
    map.insert(
        "stratum".into(),
        est.stratum.clone().map_or(Value::Null, Value::String),
    );
    map.insert("alpha".into(), {
        let mut scratch = Vec::new();
        json_opt_number(est.alpha, "alpha", &mut scratch)
    });
    map.insert("rows".into(), Value::Array(rows));
    map.insert("warnings".into(), json_strings(&warnings));
    map.insert("bootstrap".into(), json_bootstrap(&est.bootstrap));
    Value::Object(map)
}

fn test_result_json(result: &WaningTestResult) -> Value {
    let mut map = Map::new();
    map.insert("type".into(), Value::String("waning-test".into()));
    map.insert("reject".into(), Value::Bool(result.reject));
    map.insert("direction".into(), Value::String(result.direction.as_str().into()));
    let mut scratch = Vec::new();
    map.insert("alpha".into(), json_number(result.alpha, "alpha", &mut scratch));
    map.insert("basis".into(), Value::String(result.basis.clone()));
    Value::Object(map)
}

/// Renders a report as a JSON string with a stable field order.
pub fn report_to_json(report: &Report) -> String {
    let value = match report {
        Report::Waning(est) => waning_estimate_json(est),
        Report::KBounds(est) => k_bounds_json(est),
        Report::Test(result) => test_result_json(result),
    };
    serde_json::to_string_pretty(&value).expect("report values always serialize")
}

fn csv_float(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.16e}")
    } else {
        value.to_string()
    }
}

fn csv_opt_float(value: Option<f64>) -> String {
    value.map(csv_float).unwrap_or_default()
}

fn waning_estimate_csv_rows(est: &WaningEstimate) -> Vec<[String; 6]> {
    let mut rows = Vec::new();
    let mut push = |name: &str, ci: &PointCi| {
        let note = if est.degenerate.iter().any(|d| d == name) { "degenerate" } else { "" };
        rows.push([
            String::new(),
            name.to_string(),
            csv_float(ci.point),
            csv_opt_float(ci.lower),
            csv_opt_float(ci.upper),
            note.to_string(),
        ]);
    };
    push("ve1", &est.ve1);
    push("ve2_obs", &est.ve2_obs);
    push("l2", &est.l2);
    push("u2", &est.u2);
    push("l_psi", &est.l_psi);
    push("u_psi", &est.u_psi);
    if let Some(psi) = &est.psi_obs {
        push("psi_obs", psi);
    }
    rows
}

fn k_bounds_csv_rows(est: &KBoundsEstimate) -> Vec<[String; 6]> {
    let mut rows = Vec::new();
    for row in &est.rows {
        if let Some(message) = &row.error {
            rows.push([
                row.k.to_string(),
                "error".to_string(),
                String::new(),
                String::new(),
                String::new(),
                message.clone(),
            ]);
            continue;
        }
        for (name, ci) in [("l", &row.l), ("u", &row.u), ("ve_obs", &row.ve_obs)] {
            if let Some(ci) = ci {
                rows.push([
                    row.k.to_string(),
                    name.to_string(),
                    csv_float(ci.point),
                    csv_opt_float(ci.lower),
                    csv_opt_float(ci.upper),
                    String::new(),
                ]);
            }
        }
    }
    rows
}

fn test_result_csv_rows(result: &WaningTestResult) -> Vec<[String; 6]> {
    let text = |name: &str, note: String| {
        [String::new(), name.to_string(), String::new(), String::new(), String::new(), note]
    };
    vec![
        text("reject", result.reject.to_string()),
        text("direction", result.direction.as_str().to_string()),
        [
            String::new(),
            "alpha".to_string(),
            csv_float(result.alpha),
            String::new(),
            String::new(),
            String::new(),
        ],
        text("basis", result.basis.clone()),
    ]
}

/// Writes a report. JSON round-trips through [`read_report`]; CSV emits one
/// row per quantity with header `k,quantity,point,lower,upper,note`.
pub fn write_report(report: &Report, format: ReportFormat, path: &Path) -> Result<()> {
    match format {
        ReportFormat::Json => {
            std::fs::write(path, report_to_json(report) + "\n")
                .map_err(|e| io_err(format!("{}: {e}", path.display())))
        }
        ReportFormat::Csv => {
            let rows = match report {
                Report::Waning(est) => waning_estimate_csv_rows(est),
                Report::KBounds(est) => k_bounds_csv_rows(est),
                Report::Test(result) => test_result_csv_rows(result),
            };
            let mut writer = csv::Writer::from_path(path)
                .map_err(|e| io_err(format!("{}: {e}", path.display())))?;
            writer
                .write_record(["k", "quantity", "point", "lower", "upper", "note"])
                .map_err(|e| io_err(e.to_string()))?;
            for row in rows {
                writer.write_record(&row).map_err(|e| io_err(e.to_string()))?;
            }
            writer.flush().map_err(|e| io_err(e.to_string()))?;
            Ok(())
        }
    }
}

fn value_field<'v>(map: &'v Map<String, Value>, name: &str, context: &str) -> Result<&'v Value> {
    map.get(name)
        .ok_or_else(|| Error::Schema(format!("{context}: missing field `{name}`")))
}

fn value_f64(value: &Value, context: &str) -> Result<f64> {
    value
        .as_f64()
        .ok_or_else(|| Error::Schema(format!("{context}: expected a number, got {value}")))
}

fn value_opt_f64(value: &Value, context: &str) -> Result<Option<f64>> {
    if value.is_null() {
        return Ok(None);
    }
    value_f64(value, context).map(Some)
}

fn value_string(value: &Value, context: &str) -> Result<String> {
    value
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| Error::Schema(format!("{context}: expected a string, got {value}")))
}

fn value_strings(value: &Value, context: &str) -> Result<Vec<String>> {
    value
        .as_array()
        .ok_or_else(|| Error::Schema(format!("{context}: expected an array")))?
        .iter()
        .map(|v| value_string(v, context))
        .collect()
}

fn parse_point_ci(value: &Value, context: &str) -> Result<PointCi> {
    let map = value
        .as_object()
        .ok_or_else(|| Error::Schema(format!("{context}: expected an object")))?;
    let point = value_field(map, "point", context)?;
    Ok(PointCi {
        point: if point.is_null() { f64::NAN } else { value_f64(point, context)? },
        lower: value_opt_f64(value_field(map, "lower", context)?, context)?,
        upper: value_opt_f64(value_field(map, "upper", context)?, context)?,
    })
}

fn parse_bootstrap(value: &Value) -> Result<Option<BootstrapMeta>> {
    if value.is_null() {
        return Ok(None);
    }
    let map = value
        .as_object()
        .ok_or_else(|| Error::Schema("bootstrap: expected an object".into()))?;
    let count = |name: &str| -> Result<usize> {
        value_field(map, name, "bootstrap")?
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::Schema(format!("bootstrap.{name}: expected an integer")))
    };
    Ok(Some(BootstrapMeta {
        resamples: count("resamples")?,
        used: count("used")?,
        failed: count("failed")?,
        seed: value_field(map, "seed", "bootstrap")?
            .as_u64()
            .ok_or_else(|| Error::Schema("bootstrap.seed: expected an integer".into()))?,
    }))
}

fn parse_method(raw: &str) -> Result<EstimationMethod> {
    match raw {
        "summary-delta" => Ok(EstimationMethod::SummaryDelta),
        "logistic-bootstrap" => Ok(EstimationMethod::LogisticBootstrap),
        "cox-bootstrap" => Ok(EstimationMethod::CoxBootstrap),
        other => Err(Error::Schema(format!("unknown method tag `{other}`"))),
    }
}

fn parse_waning_estimate(map: &Map<String, Value>) -> Result<WaningEstimate> {
    let context = "waning-estimate";
    let ci = |name: &str| -> Result<PointCi> {
        parse_point_ci(value_field(map, name, context)?, &format!("{context}.{name}"))
    };
    let psi = match value_field(map, "psi_obs", context)? {
        Value::Null => None,
        value => Some(parse_point_ci(value, "waning-estimate.psi_obs")?),
    };
    Ok(WaningEstimate {
        ve1: ci("ve1")?,
        ve2_obs: ci("ve2_obs")?,
        l2: ci("l2")?,
        u2: ci("u2")?,
        l_psi: ci("l_psi")?,
        u_psi: ci("u_psi")?,
        psi_obs: psi,
        alpha: value_opt_f64(value_field(map, "alpha", context)?, "alpha")?,
        method: parse_method(&value_string(value_field(map, "method", context)?, "method")?)?,
        stratum: match value_field(map, "stratum", context)? {
            Value::Null => None,
            value => Some(value_string(value, "stratum")?),
        },
        ve2_definition: match value_string(
            value_field(map, "ve2_definition", context)?,
            "ve2_definition",
        )?
        .as_str()
        {
            "hazard-ratio" => Ve2Definition::HazardRatio,
            "conditional" => Ve2Definition::Conditional,
            other => {
                return Err(Error::Schema(format!("unknown ve2 definition `{other}`")));
            }
        },
        degenerate: value_strings(value_field(map, "degenerate", context)?, "degenerate")?,
        warnings: value_strings(value_field(map, "warnings", context)?, "warnings")?,
        bootstrap: parse_bootstrap(value_field(map, "bootstrap", context)?)?,
    })
}

fn parse_k_bounds(map: &Map<String, Value>) -> Result<KBoundsEstimate> {
    let context = "k-bounds";
    let rows_value = value_field(map, "rows", context)?
        .as_array()
        .ok_or_else(|| Error::Schema("k-bounds.rows: expected an array".into()))?;
    let mut rows = Vec::with_capacity(rows_value.len());
    for value in rows_value {
        let row = value
            .as_object()
            .ok_or_else(|| Error::Schema("k-bounds row: expected an object".into()))?;
        let k = value_field(row, "k", "row")?
            .as_u64()
            .ok_or_else(|| Error::Schema("row.k: expected an integer".into()))?
            as usize;
        let optional_ci = |name: &str| -> Result<Option<PointCi>> {
            match value_field(row, name, "row")? {
                Value::Null => Ok(None),
                value => parse_point_ci(value, name).map(Some),
            }
        };
        rows.push(KBoundRow {
            k,
            l: optional_ci("l")?,
            u: optional_ci("u")?,
            ve_obs: optional_ci("ve_obs")?,
            error: match value_field(row, "error", "row")? {
                Value::Null => None,
                value => Some(value_string(value, "row.error")?),
            },
        });
    }
    Ok(KBoundsEstimate {
        rows,
        backend: match value_string(value_field(map, "backend", context)?, "backend")?.as_str() {
            "exact-product" => KBackend::ExactProduct,
            "rare-event" => KBackend::RareEvent,
            other => return Err(Error::Schema(format!("unknown backend `{other}`"))),
        },
        alpha: value_opt_f64(value_field(map, "alpha", context)?, "alpha")?,
        method: parse_method(&value_string(value_field(map, "method", context)?, "method")?)?,
        stratum: match value_field(map, "stratum", context)? {
            Value::Null => None,
            value => Some(value_string(value, "stratum")?),
        },
        warnings: value_strings(value_field(map, "warnings", context)?, "warnings")?,
        bootstrap: parse_bootstrap(value_field(map, "bootstrap", context)?)?,
    })
}

fn parse_test_result(map: &Map<String, Value>) -> Result<WaningTestResult> {
    let context = "waning-test";
    Ok(WaningTestResult {
        reject: value_field(map, "reject", context)?
            .as_bool()
            .ok_or_else(|| Error::Schema("reject: expected a boolean".into()))?,
        direction: match value_string(value_field(map, "direction", context)?, "direction")?
            .as_str()
        {
            "waning" => WaningDirection::Waning,
            "strengthening" => WaningDirection::Strengthening,
            "none" => WaningDirection::None,
            other => return Err(Error::Schema(format!("unknown direction `{other}`"))),
        },
        alpha: value_f64(value_field(map, "alpha", context)?, "alpha")?,
        basis: value_string(value_field(map, "basis", context)?, "basis")?,
    })
}

/// Reads a JSON report written by [`write_report`].
pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let map = value
        .as_object()
        .ok_or_else(|| Error::Schema("report: expected a JSON object".into()))?;
    match value_string(value_field(map, "type", "report")?, "type")?.as_str() {
        "waning-estimate" => Ok(Report::Waning(parse_waning_estimate(map)?)),
        "k-bounds" => Ok(Report::KBounds(parse_k_bounds(map)?)),
        "waning-test" => Ok(Report::Test(parse_test_result(map)?)),
        other => Err(Error::Schema(format!("unknown report type `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KBackend, PointCi};
    use tempfile::tempdir;

    fn spec_2x1() -> IntervalSpec {
        IntervalSpec::equal_intervals(2, 30)
    }

    fn sample_table() -> SummaryTable {
        let mut cells = Vec::new();
        for (k, j, arm, events, person_time) in [
            (1, 1, 0, 24u64, 36000.0),
            (1, 1, 1, 2, 36200.0),
            (2, 1, 0, 30, 35000.0),
            (2, 1, 1, 5, 35900.0),
        ] {
            cells.push(SummaryCell { k, j, arm, stratum: None, events, person_time });
        }
        SummaryTable { spec: spec_2x1(), cells }
    }

    fn write(path: &Path, text: &str) {
        std::fs::write(path, text).unwrap();
    }

    #[test]
    fn summary_csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        let table = sample_table();
        write_summary_csv(&table, &path).unwrap();
        let back = read_summary_csv(&path, &spec_2x1()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn fractional_event_count_is_a_parse_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write(
            &path,
            "k,j,arm,stratum,events,person_time,duration_days\n1,1,0,,3.5,1000,30\n",
        );
        let err = read_summary_csv(&path, &spec_2x1()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "events");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn duplicate_summary_cell_names_the_key() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write(
            &path,
            "k,j,arm,stratum,events,person_time,duration_days\n\
             1,1,0,,3,1000,30\n1,1,0,,4,1200,30\n",
        );
        let err = read_summary_csv(&path, &spec_2x1()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
        assert!(err.to_string().contains("k=1, j=1, arm=0"), "{err}");
    }

    #[test]
    fn duration_disagreement_is_a_schema_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write(
            &path,
            "k,j,arm,stratum,events,person_time,duration_days\n1,1,0,,3,1000,29\n",
        );
        let err = read_summary_csv(&path, &spec_2x1()).unwrap_err();
        assert!(err.to_string().contains("interval spec says 30"), "{err}");
    }

    #[test]
    fn negative_person_time_is_a_parse_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write(
            &path,
            "k,j,arm,stratum,events,person_time,duration_days\n1,1,0,,3,-5,30\n",
        );
        let err = read_summary_csv(&path, &spec_2x1()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn wrong_summary_header_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write(&path, "k,j,arm,events,person_time,duration_days\n");
        let err = read_summary_csv(&path, &spec_2x1()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    fn sample_cohort() -> Cohort {
        let schema = vec![
            CovariateColumn { name: "l".into(), kind: CovariateKind::Numeric },
            CovariateColumn { name: "site".into(), kind: CovariateKind::Categorical },
        ];
        let records = vec![
            IndividualRecord {
                id: "a".into(),
                arm: 0,
                covariates: vec![
                    CovariateValue::Numeric(0.25),
                    CovariateValue::Categorical("north".into()),
                ],
                time_days: 14.0,
                event: 1,
            },
            IndividualRecord {
                id: "b".into(),
                arm: 1,
                covariates: vec![
                    CovariateValue::Numeric(0.75),
                    CovariateValue::Categorical("south".into()),
                ],
                time_days: 60.0,
                event: 0,
            },
        ];
        Cohort { records, schema }
    }

    #[test]
    fn cohort_csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cohort.csv");
        let cohort = sample_cohort();
        write_cohort_csv(&cohort, &path).unwrap();
        let back = read_cohort_csv(&path, &cohort.schema).unwrap();
        assert_eq!(back, cohort);
    }

    #[test]
    fn missing_covariate_column_is_a_schema_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cohort.csv");
        write(&path, "id,arm,time_days,event\nx,0,3,1\n");
        let err = read_cohort_csv(
            &path,
            &[CovariateColumn { name: "age".into(), kind: CovariateKind::Numeric }],
        )
        .unwrap_err();
        assert!(err.to_string().contains("age"), "{err}");
    }

    #[test]
    fn nonpositive_time_is_a_parse_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cohort.csv");
        write(&path, "id,arm,time_days,event\nx,0,-3,1\n");
        let err = read_cohort_csv(&path, &[]).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        write(&path, "id,arm,time_days,event\nx,0,0,1\n");
        assert!(read_cohort_csv(&path, &[]).is_err());
    }

    #[test]
    fn event_outside_binary_is_a_parse_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cohort.csv");
        write(&path, "id,arm,time_days,event\nx,0,3,2\n");
        let err = read_cohort_csv(&path, &[]).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn counterfactual_csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        let panel = vec![
            CounterfactualRow { id: "s0".into(), dy1_a1_e1: 0, dy2_a1_iso: 1, dy2_a0_iso: 0 },
            CounterfactualRow { id: "s1".into(), dy1_a1_e1: 1, dy2_a1_iso: 1, dy2_a0_iso: 1 },
        ];
        write_counterfactual_csv(&panel, &path).unwrap();
        assert_eq!(read_counterfactual_csv(&path).unwrap(), panel);
    }

    #[test]
    fn interval_spec_json_round_trips_and_validates() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("spec.json");
        let spec = spec_2x1();
        write_interval_spec_json(&spec, &path).unwrap();
        assert_eq!(read_interval_spec_json(&path).unwrap(), spec);
        write(&path, r#"{"intervals": [{"k": 1, "subintervals": []}]}"#);
        assert!(read_interval_spec_json(&path).is_err());
    }

    fn sample_estimate() -> WaningEstimate {
        WaningEstimate {
            ve1: PointCi { point: 0.95, lower: Some(0.9340297574236879), upper: Some(0.9621041260063871) },
            ve2_obs: PointCi { point: 0.896551724137931, lower: Some(0.80), upper: Some(0.95) },
            l2: PointCi { point: 0.8620689655172413, lower: Some(0.77), upper: None },
            u2: PointCi { point: 0.9387755102040817, lower: None, upper: Some(0.97) },
            l_psi: PointCi { point: 0.3625, lower: Some(0.26), upper: None },
            u_psi: PointCi { point: 0.81, lower: None, upper: Some(1.27) },
            psi_obs: Some(PointCi { point: 0.48333333333333334, lower: Some(0.2), upper: Some(1.1) }),
            alpha: Some(0.05),
            method: EstimationMethod::SummaryDelta,
            stratum: None,
            ve2_definition: Ve2Definition::HazardRatio,
            degenerate: vec![],
            warnings: vec!["example warning".into()],
            bootstrap: None,
        }
    }

    #[test]
    fn report_json_round_trips_and_encodes_sidedness_as_null() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("report.json");
        let report = Report::Waning(sample_estimate());
        write_report(&report, ReportFormat::Json, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let value: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value.pointer("/u_psi/lower"), Some(&Value::Null));
        assert_eq!(value.pointer("/u_psi/upper").and_then(Value::as_f64), Some(1.27));
        assert_eq!(value.pointer("/u_psi/point").and_then(Value::as_f64), Some(0.81));
        assert_eq!(read_report(&path).unwrap(), report);
    }

    #[test]
    fn report_floats_survive_with_full_precision() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("report.json");
        let mut est = sample_estimate();
        est.ve1.point = 0.1 + 0.2;
        est.l_psi.lower = Some(f64::MIN_POSITIVE);
        let report = Report::Waning(est.clone());
        write_report(&report, ReportFormat::Json, &path).unwrap();
        match read_report(&path).unwrap() {
            Report::Waning(back) => {
                assert_eq!(back.ve1.point.to_bits(), est.ve1.point.to_bits());
                assert_eq!(back.l_psi.lower, est.l_psi.lower);
            }
            other => panic!("wrong report type: {other:?}"),
        }
    }

    #[test]
    fn non_finite_points_serialize_as_null_with_a_warning() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("report.json");
        let mut est = sample_estimate();
        est.u_psi = PointCi::point_only(f64::INFINITY);
        est.degenerate.push("u_psi".into());
        write_report(&Report::Waning(est), ReportFormat::Json, &path).unwrap();
        let value: Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(value.pointer("/u_psi/point"), Some(&Value::Null));
        let warnings = value.pointer("/warnings").and_then(Value::as_array).unwrap();
        assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("u_psi")));
    }

    #[test]
    fn waning_test_report_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("test.json");
        let report = Report::Test(WaningTestResult {
            reject: true,
            direction: WaningDirection::Waning,
            alpha: 0.05,
            basis: "upper limit of u_psi = 0.8400 < 1".into(),
        });
        write_report(&report, ReportFormat::Json, &path).unwrap();
        assert_eq!(read_report(&path).unwrap(), report);
    }

    #[test]
    fn k_bounds_report_round_trips_with_error_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("kb.json");
        let report = Report::KBounds(KBoundsEstimate {
            rows: vec![
                KBoundRow {
                    k: 2,
                    l: Some(PointCi { point: 0.2, lower: Some(0.1), upper: None }),
                    u: Some(PointCi { point: 0.9, lower: None, upper: Some(0.95) }),
                    ve_obs: Some(PointCi { point: 0.5, lower: Some(0.4), upper: Some(0.6) }),
                    error: None,
                },
                KBoundRow {
                    k: 3,
                    l: None,
                    u: None,
                    ve_obs: None,
                    error: Some("Lambda[k=3, arm=0] is zero".into()),
                },
            ],
            backend: KBackend::RareEvent,
            alpha: Some(0.05),
            method: EstimationMethod::SummaryDelta,
            stratum: Some("north".into()),
            warnings: vec![],
            bootstrap: Some(BootstrapMeta { resamples: 500, used: 498, failed: 2, seed: 9 }),
        });
        write_report(&report, ReportFormat::Json, &path).unwrap();
        assert_eq!(read_report(&path).unwrap(), report);
    }

    #[test]
    fn csv_report_emits_one_row_per_quantity() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("report.csv");
        write_report(&Report::Waning(sample_estimate()), ReportFormat::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,quantity,point,lower,upper,note");
        assert_eq!(lines.len(), 1 + 7);
        assert!(lines.iter().any(|l| l.starts_with(",l_psi,")));
        let mut no_psi = sample_estimate();
        no_psi.psi_obs = None;
        write_report(&Report::Waning(no_psi), ReportFormat::Csv, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1 + 6);
    }
}
