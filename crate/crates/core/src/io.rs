//! Signal-set CSV ingestion and emission.
//!
//! The long layout is canonical:
//!
//! ```text
//! signal_id,label,t,value
//! a,ctrl,0,0.12
//! a,ctrl,1,-0.40
//! ```
//!
//! Within one signal `t` must be a strictly increasing integer. The wide
//! layout has one signal per row with the id first, optionally a `label`
//! column, then the samples; a header row is detected when the sample columns
//! do not parse as numbers. Missing values are rejected in both layouts.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::signal::{Signal, SignalSet};
use crate::{Error, Result};

pub const LONG_HEADER: [&str; 4] = ["signal_id", "label", "t", "value"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvLayout {
    Long,
    Wide,
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn data_err(msg: String) -> Error {
    Error::Data(msg)
}

pub fn read_signals_path(path: impl AsRef<Path>) -> Result<(SignalSet, CsvLayout)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| data_err(format!("cannot open {}: {e}", path.display())))?;
    read_signals(file)
}

pub fn read_signals<R: Read>(reader: R) -> Result<(SignalSet, CsvLayout)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let rows = rdr
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| data_err(format!("malformed CSV: {e}")))?;
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| r.iter().map(str::to_string).collect())
        .filter(|r: &Vec<String>| !(r.len() == 1 && r[0].is_empty()))
        .collect();
    let Some(first) = rows.first() else {
        return Err(data_err("CSV input is empty".into()));
    };
    if first.iter().map(String::as_str).eq(LONG_HEADER) {
        Ok((parse_long(&rows[1..])?, CsvLayout::Long))
    } else {
        Ok((parse_wide(&rows)?, CsvLayout::Wide))
    }
}

fn parse_value(field: &str, id: &str, line: usize) -> Result<f64> {
    if field.is_empty() {
        return Err(data_err(format!("missing value for '{id}' on line {line}")));
    }
    let v: f64 = field
        .parse()
        .map_err(|_| data_err(format!("bad number '{field}' for '{id}' on line {line}")))?;
    if !v.is_finite() {
        return Err(data_err(format!("non-finite value for '{id}' on line {line}")));
    }
    Ok(v)
}

fn parse_long(rows: &[Vec<String>]) -> Result<SignalSet> {
    struct Acc {
        label: Option<String>,
        last_t: i64,
        values: Vec<f64>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut acc: HashMap<String, Acc> = HashMap::new();
    for (k, row) in rows.iter().enumerate() {
        let line = k + 2;
        if row.len() != 4 {
            return Err(data_err(format!("line {line}: expected 4 fields, got {}", row.len())));
        }
        let id = row[0].clone();
        if id.is_empty() {
            return Err(data_err(format!("line {line}: empty signal_id")));
        }
        let label = (!row[1].is_empty()).then(|| row[1].clone());
        let t: i64 = row[2]
            .parse()
            .map_err(|_| data_err(format!("line {line}: t must be an integer, got '{}'", row[2])))?;
        let value = parse_value(&row[3], &id, line)?;
        match acc.get_mut(&id) {
            Some(a) => {
                if t <= a.last_t {
                    return Err(data_err(format!(
                        "line {line}: t for '{id}' not strictly increasing ({t} after {})",
                        a.last_t
                    )));
                }
                if a.label != label {
                    return Err(data_err(format!("line {line}: conflicting labels for '{id}'")));
                }
                a.last_t = t;
                a.values.push(value);
            }
            None => {
                order.push(id.clone());
                acc.insert(
                    id,
                    Acc {
                        label,
                        last_t: t,
                        values: vec![value],
                    },
                );
            }
        }
    }
    if order.is_empty() {
        return Err(data_err("CSV has a header but no rows".into()));
    }
    let signals = order
        .into_iter()
        .map(|id| {
            let a = acc.remove(&id).expect("id recorded");
            Ok(Signal::new(id, a.values)?.with_label(a.label))
        })
        .collect::<Result<Vec<_>>>()?;
    SignalSet::new(signals)
}

fn parse_wide(rows: &[Vec<String>]) -> Result<SignalSet> {
    let first = &rows[0];
    let is_header = first.len() < 2 || first[1..].iter().any(|f| f.parse::<f64>().is_err() && !f.is_empty());
    let (has_label, body) = if is_header {
        (first.get(1).is_some_and(|h| h.eq_ignore_ascii_case("label")), &rows[1..])
    } else {
        (false, rows)
    };
    let skip = if has_label { 2 } else { 1 };
    let mut signals = Vec::with_capacity(body.len());
    for (k, row) in body.iter().enumerate() {
        let line = k + 1 + usize::from(is_header);
        let id = row.first().cloned().unwrap_or_default();
        if id.is_empty() {
            return Err(data_err(format!("line {line}: empty signal id")));
        }
        if row.len() <= skip {
            return Err(data_err(format!("line {line}: signal '{id}' has no samples")));
        }
        let label = if has_label { Some(row[1].clone()).filter(|l| !l.is_empty()) } else { None };
        let values = row[skip..]
            .iter()
            .map(|f| parse_value(f, &id, line))
            .collect::<Result<Vec<_>>>()?;
        signals.push(Signal::new(id, values)?.with_label(label));
    }
    SignalSet::new(signals)
}

pub fn write_signals<W: Write>(set: &SignalSet, layout: CsvLayout, writer: W) -> Result<()> {
    let io_err = |e: csv::Error| data_err(format!("write failed: {e}"));
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    match layout {
        CsvLayout::Long => {
            w.write_record(LONG_HEADER).map_err(io_err)?;
            for s in set {
                for (t, v) in s.values().iter().enumerate() {
                    let t = t.to_string();
                    let v = format_float(*v);
                    w.write_record([s.id(), s.label().unwrap_or(""), t.as_str(), v.as_str()])
                        .map_err(io_err)?;
                }
            }
        }
        CsvLayout::Wide => {
            let width = set.iter().map(Signal::len).max().unwrap_or(0);
            let mut header = vec!["signal_id".to_string(), "label".to_string()];
            header.extend((0..width).map(|t| format!("x{t}")));
            w.write_record(&header).map_err(io_err)?;
            for s in set {
                let mut rec = vec![s.id().to_string(), s.label().unwrap_or("").to_string()];
                rec.extend(s.values().iter().map(|v| format_float(*v)));
                w.write_record(&rec).map_err(io_err)?;
            }
        }
    }
    w.flush().map_err(|e| data_err(format!("write failed: {e}")))?;
    Ok(())
}

/// Serde adapter writing non-finite floats as `"inf"`, `"-inf"` or `null`.
pub mod float_or_inf {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_none()
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = f64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number, \"inf\", \"-inf\" or null")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    _ => Err(E::custom(format!("unexpected string '{v}'"))),
                }
            }
            fn visit_unit<E: de::Error>(self) -> Result<f64, E> {
                Ok(f64::NAN)
            }
            fn visit_none<E: de::Error>(self) -> Result<f64, E> {
                Ok(f64::NAN)
            }
        }
        d.deserialize_any(V)
    }
}
