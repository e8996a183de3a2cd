//! CSV and JSON writers for point and threshold records.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::{Map, Value};
use tcs_core::experiment::{ThresholdEstimate, ThresholdStatus};
use tcs_core::PointEstimate;

pub const POINT_HEADER: &str = "scheme,d,p_bond,p_comp,trials,failures,percolation_failures,rate,ci_low,ci_high,seed";
pub const THRESHOLD_HEADER: &str = "scheme,p_bond,status,p_th,ci_low,ci_high,method,nu,reduced_chi2,distances";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Decimal with 6 significant digits, trailing zeros dropped.
pub fn fmt6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn num6(x: f64) -> Value {
    let rounded: f64 = fmt6(x).parse().unwrap_or(x);
    serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
}

fn opt6(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

fn status_str(s: ThresholdStatus) -> &'static str {
    match s {
        ThresholdStatus::Found => "found",
        ThresholdStatus::NoCrossing => "no-crossing",
    }
}

fn point_fields(p: &PointEstimate) -> Vec<(&'static str, Value)> {
    vec![
        ("scheme", Value::from(p.scheme.as_str())),
        ("d", Value::from(p.d)),
        ("p_bond", num6(p.p_bond)),
        ("p_comp", num6(p.p_comp)),
        ("trials", Value::from(p.trials)),
        ("failures", Value::from(p.failures)),
        ("percolation_failures", Value::from(p.percolation_failures)),
        ("rate", num6(p.rate)),
        ("ci_low", num6(p.ci_low)),
        ("ci_high", num6(p.ci_high)),
        ("seed", Value::from(p.seed)),
    ]
}

fn point_row(p: &PointEstimate) -> String {
    [
        p.scheme.as_str().to_string(),
        p.d.to_string(),
        fmt6(p.p_bond),
        fmt6(p.p_comp),
        p.trials.to_string(),
        p.failures.to_string(),
        p.percolation_failures.to_string(),
        fmt6(p.rate),
        fmt6(p.ci_low),
        fmt6(p.ci_high),
        p.seed.to_string(),
    ]
    .join(",")
}

fn threshold_fields(t: &ThresholdEstimate) -> Vec<(&'static str, Value)> {
    let opt = |x: Option<f64>| x.map_or(Value::Null, num6);
    vec![
        ("scheme", Value::from(t.scheme.as_str())),
        ("p_bond", num6(t.p_bond)),
        ("status", Value::from(status_str(t.status))),
        ("p_th", opt(t.p_th)),
        ("ci_low", opt(t.ci_low)),
        ("ci_high", opt(t.ci_high)),
        ("method", t.method.map_or(Value::Null, |m| Value::from(m.as_str()))),
        ("nu", opt(t.nu)),
        ("reduced_chi2", opt(t.reduced_chi2)),
        ("distances", Value::from(t.distances.clone())),
    ]
}

fn threshold_row(t: &ThresholdEstimate) -> String {
    [
        t.scheme.as_str().to_string(),
        fmt6(t.p_bond),
        status_str(t.status).to_string(),
        opt6(t.p_th),
        opt6(t.ci_low),
        opt6(t.ci_high),
        t.method.map(|m| m.as_str().to_string()).unwrap_or_default(),
        opt6(t.nu),
        opt6(t.reduced_chi2),
        t.distances.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(";"),
    ]
    .join(",")
}

fn json_array(records: Vec<Vec<(&'static str, Value)>>) -> Value {
    Value::Array(
        records
            .into_iter()
            .map(|fields| Value::Object(fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<Map<_, _>>()))
            .collect(),
    )
}

fn write_json(out: &mut dyn Write, v: &impl Serialize) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)
}

pub fn write_points(out: &mut dyn Write, points: &[PointEstimate], format: Format) -> io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "{POINT_HEADER}")?;
            for p in points {
                writeln!(out, "{}", point_row(p))?;
            }
            Ok(())
        }
        Format::Json => write_json(out, &json_array(points.iter().map(point_fields).collect())),
    }
}

pub fn write_thresholds(out: &mut dyn Write, records: &[ThresholdEstimate], format: Format) -> io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "{THRESHOLD_HEADER}")?;
            for t in records {
                writeln!(out, "{}", threshold_row(t))?;
            }
            Ok(())
        }
        Format::Json => write_json(out, &json_array(records.iter().map(threshold_fields).collect())),
    }
}
