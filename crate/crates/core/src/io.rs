//! CSV and JSON encodings of datasets and reports. Floats are written with
//! 17 significant digits so every value round-trips exactly.

use std::io::{Read, Write};

use serde::Serializer;
use thiserror::Error;

use crate::datagen::{SinglePeriodObservation, SinglePeriodRecord, TrialRecord};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unexpected header `{found}` (expected `{expected}`)")]
    Header { expected: String, found: String },
    #[error("line {line}, column `{column}`: invalid value `{value}`")]
    Value { line: u64, column: String, value: String },
    #[error("dataset has no rows")]
    Empty,
}

pub const TRIAL_HEADER: [&str; 9] = ["l0", "a", "l1", "d1", "r1", "l2", "d2", "r2", "y"];
pub const SINGLE_PERIOD_HEADER: [&str; 10] = [
    "l0",
    "a",
    "l1",
    "r",
    "d",
    "y",
    "d_a_r0",
    "d_a_r1",
    "y_a_r0_d0",
    "y_a_r0_d1",
];

/// Seventeen significant digits in scientific notation, e.g.
/// `-1.2500000000000000e-1`; `NaN`/`inf` for non-finite values.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Serde helper writing a float as a JSON number with 17 significant digits
/// (null when not finite).
pub fn serialize_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::Serialize;
    if x.is_finite() {
        let n: serde_json::Number = format_float(*x).parse().map_err(serde::ser::Error::custom)?;
        n.serialize(s)
    } else {
        s.serialize_none()
    }
}

pub fn serialize_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => serialize_f64(v, s),
        None => s.serialize_none(),
    }
}

/// Pretty JSON with 17-significant-digit floats, via the value tree.
pub fn to_json_string<V: serde::Serialize>(value: &V) -> Result<String, IoError> {
    Ok(serde_json::to_string_pretty(&with_full_precision(
        serde_json::to_value(value)?,
    ))?)
}

fn with_full_precision(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => match n.as_f64() {
            Some(x) if x.is_finite() => format_float(x).parse().map(Value::Number).unwrap_or(Value::Number(n)),
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(with_full_precision).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, with_full_precision(v))).collect()),
        other => other,
    }
}

fn fmt_t<T: Real>(x: T) -> String {
    format_float(x.to_f64_lossy())
}

pub fn write_trial_csv<T: Real, W: Write>(data: &[TrialRecord<T>], out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIAL_HEADER)?;
    for r in data {
        w.write_record([
            fmt_t(r.l0),
            r.a.to_string(),
            fmt_t(r.l1),
            r.d1.to_string(),
            r.r1.to_string(),
            fmt_t(r.l2),
            r.d2.to_string(),
            r.r2.to_string(),
            fmt_t(r.y),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_single_period_csv<T: Real, W: Write>(data: &[SinglePeriodRecord<T>], out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SINGLE_PERIOD_HEADER)?;
    for r in data {
        w.write_record([
            fmt_t(r.l0),
            r.a.to_string(),
            fmt_t(r.l1),
            r.r.to_string(),
            r.d.to_string(),
            fmt_t(r.y),
            r.d_a_r0.to_string(),
            r.d_a_r1.to_string(),
            fmt_t(r.y_a_r0_d0),
            fmt_t(r.y_a_r0_d1),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Column lookup for one parsed row.
struct Row<'a> {
    record: &'a csv::StringRecord,
    header: &'a [String],
    line: u64,
}

impl Row<'_> {
    fn raw(&self, column: &str) -> &str {
        let j = self.header.iter().position(|h| h == column).expect("validated header");
        self.record.get(j).unwrap_or("").trim()
    }

    fn bad(&self, column: &str) -> IoError {
        IoError::Value {
            line: self.line,
            column: column.to_string(),
            value: self.raw(column).to_string(),
        }
    }

    fn real<T: Real>(&self, column: &str) -> Result<T, IoError> {
        match self.raw(column).parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(T::c(v)),
            _ => Err(self.bad(column)),
        }
    }

    fn binary(&self, column: &str) -> Result<u8, IoError> {
        match self.raw(column) {
            "0" => Ok(0),
            "1" => Ok(1),
            _ => Err(self.bad(column)),
        }
    }
}

fn read_rows<Rd: Read, V>(
    input: Rd,
    required: &[&str],
    mut parse: impl FnMut(&Row<'_>) -> Result<V, IoError>,
) -> Result<Vec<V>, IoError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if required.iter().any(|c| !header.iter().any(|h| h == c)) {
        return Err(IoError::Header {
            expected: required.join(","),
            found: header.join(","),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(parse(&Row {
            record: &rec,
            header: &header,
            line,
        })?);
    }
    if out.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(out)
}

pub fn read_trial_csv<T: Real, Rd: Read>(input: Rd) -> Result<Vec<TrialRecord<T>>, IoError> {
    read_rows(input, &TRIAL_HEADER, |row| {
        Ok(TrialRecord {
            l0: row.real("l0")?,
            a: row.binary("a")?,
            l1: row.real("l1")?,
            d1: row.binary("d1")?,
            r1: row.binary("r1")?,
            l2: row.real("l2")?,
            d2: row.binary("d2")?,
            r2: row.binary("r2")?,
            y: row.real("y")?,
        })
    })
}

/// Factual columns `l0,a,l1,r,d,y` of a one-visit file; counterfactual
/// columns, if present, are ignored.
pub fn read_single_period_csv<T: Real, Rd: Read>(input: Rd) -> Result<Vec<SinglePeriodObservation<T>>, IoError> {
    read_rows(input, &SINGLE_PERIOD_HEADER[..6], |row| {
        Ok(SinglePeriodObservation {
            l0: row.real("l0")?,
            a: row.binary("a")?,
            l1: row.real("l1")?,
            r: row.binary("r")?,
            d: row.binary("d")?,
            y: row.real("y")?,
        })
    })
}

/// Which dataset a CSV header describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    TwoVisit,
    SingleVisit,
}

pub fn detect_dataset_kind(header_line: &str) -> Option<DatasetKind> {
    let cols: Vec<&str> = header_line.trim().split(',').map(str::trim).collect();
    let has = |names: &[&str]| names.iter().all(|n| cols.contains(n));
    if has(&TRIAL_HEADER) {
        Some(DatasetKind::TwoVisit)
    } else if has(&SINGLE_PERIOD_HEADER[..6]) {
        Some(DatasetKind::SingleVisit)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjustment::CausalStructure;
    use crate::datagen::{generate_single_period, generate_trial, ScenarioSpec, SinglePeriodSpec};

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(format_float(0.390625), "3.9062500000000000e-1");
        assert_eq!(format_float(-1.0), "-1.0000000000000000e0");
        let x = 0.1f64 + 0.2;
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn trial_round_trip() {
        let spec = ScenarioSpec::<f64>::standard(CausalStructure::RPrecedesD, 50);
        let data = generate_trial(&spec, 3).unwrap();
        let mut buf = Vec::new();
        write_trial_csv(&data, &mut buf).unwrap();
        let back: Vec<TrialRecord<f64>> = read_trial_csv(buf.as_slice()).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn single_period_round_trip() {
        let data = generate_single_period(&SinglePeriodSpec::<f64>::standard(40), 3).unwrap();
        let mut buf = Vec::new();
        write_single_period_csv(&data, &mut buf).unwrap();
        let back: Vec<SinglePeriodObservation<f64>> = read_single_period_csv(buf.as_slice()).unwrap();
        let expected: Vec<_> = data.iter().map(|r| r.observation()).collect();
        assert_eq!(back, expected);
        let header = String::from_utf8(buf).unwrap();
        assert_eq!(
            detect_dataset_kind(header.lines().next().unwrap()),
            Some(DatasetKind::SingleVisit)
        );
    }

    #[test]
    fn rejects_bad_values() {
        let text = "l0,a,l1,d1,r1,l2,d2,r2,y\n0.1,2,0,0,0,0,0,0,1\n";
        assert!(matches!(
            read_trial_csv::<f64, _>(text.as_bytes()),
            Err(IoError::Value { column, .. }) if column == "a"
        ));
        assert!(matches!(
            read_trial_csv::<f64, _>("x,y\n1,2\n".as_bytes()),
            Err(IoError::Header { .. })
        ));
        assert!(matches!(
            read_trial_csv::<f64, _>("l0,a,l1,d1,r1,l2,d2,r2,y\n".as_bytes()),
            Err(IoError::Empty)
        ));
    }

    #[test]
    fn json_floats_carry_full_precision() {
        #[derive(serde::Serialize)]
        struct S {
            x: f64,
            n: usize,
        }
        let s = to_json_string(&S { x: 0.1, n: 3 }).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
    }
}
