//! Observation datasets and their CSV formats.
//!
//! Three shapes cover the built-in models:
//! - `Scalar`: a flat list of real observations (conjugate-normal model).
//! - `Grouped`: group-indexed observations (hierarchical model), CSV header
//!   `group,index,value`.
//! - `TimeSeries`: per-time (hare, lynx) pairs (predator-prey model), CSV
//!   header `year,hare_pelts,lynx_pelts`.

use crate::error::CsvError;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// One row of a grouped dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupedObs {
    pub group: usize,
    pub index: usize,
    pub value: f64,
}

/// One row of a two-species time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeObs {
    /// Time in years relative to the series start.
    pub time: f64,
    pub hare: f64,
    pub lynx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Dataset {
    Scalar { values: Vec<f64> },
    Grouped { group_count: usize, rows: Vec<GroupedObs> },
    TimeSeries { rows: Vec<TimeObs> },
}

impl Dataset {
    pub fn empty_scalar() -> Self {
        Dataset::Scalar { values: Vec::new() }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Scalar { values } => values.len(),
            Dataset::Grouped { rows, .. } => rows.len(),
            Dataset::TimeSeries { rows } => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Group-major grouped dataset with `group_count * per_group` slots filled
    /// from `values` in row order.
    pub fn grouped_from_values(group_count: usize, per_group: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), group_count * per_group);
        let rows = values
            .iter()
            .enumerate()
            .map(|(k, &value)| GroupedObs {
                group: k / per_group,
                index: k % per_group,
                value,
            })
            .collect();
        Dataset::Grouped { group_count, rows }
    }

    /// Concatenate two datasets of the same shape kind. Used to form the
    /// augmented conditioning set `(y_obs, y_sim)`. Concatenating an empty
    /// dataset is the identity.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        match (self, other) {
            (Dataset::Scalar { values: a }, Dataset::Scalar { values: b }) => {
                let mut values = a.clone();
                values.extend_from_slice(b);
                Dataset::Scalar { values }
            }
            (
                Dataset::Grouped { group_count: ga, rows: a },
                Dataset::Grouped { group_count: gb, rows: b },
            ) => {
                assert_eq!(ga, gb, "cannot concatenate datasets with different group counts");
                let mut rows = a.clone();
                rows.extend_from_slice(b);
                Dataset::Grouped { group_count: *ga, rows }
            }
            (Dataset::TimeSeries { rows: a }, Dataset::TimeSeries { rows: b }) => {
                let mut rows = a.clone();
                rows.extend_from_slice(b);
                Dataset::TimeSeries { rows }
            }
            _ => panic!("cannot concatenate datasets of different shapes"),
        }
    }

    /// Keep the leading `fraction` of observations (row order). `fraction = 1`
    /// is the identity.
    pub fn leading_fraction(&self, fraction: f64) -> Dataset {
        assert!(fraction > 0.0 && fraction <= 1.0, "fraction must be in (0, 1]");
        let keep = ((self.len() as f64) * fraction).floor() as usize;
        match self {
            Dataset::Scalar { values } => Dataset::Scalar { values: values[..keep].to_vec() },
            Dataset::Grouped { group_count, rows } => Dataset::Grouped {
                group_count: *group_count,
                rows: rows[..keep].to_vec(),
            },
            Dataset::TimeSeries { rows } => Dataset::TimeSeries { rows: rows[..keep].to_vec() },
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        match self {
            Dataset::Scalar { values } => {
                out.push_str("group,index,value\n");
                for (i, v) in values.iter().enumerate() {
                    let _ = writeln!(out, "0,{i},{v}");
                }
            }
            Dataset::Grouped { rows, .. } => {
                out.push_str("group,index,value\n");
                for r in rows {
                    let _ = writeln!(out, "{},{},{}", r.group, r.index, r.value);
                }
            }
            Dataset::TimeSeries { rows } => {
                out.push_str("year,hare_pelts,lynx_pelts\n");
                for r in rows {
                    let _ = writeln!(out, "{},{},{}", 1900.0 + r.time, r.hare, r.lynx);
                }
            }
        }
        out
    }
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    what: &str,
    path: &str,
    line: usize,
) -> Result<T, CsvError> {
    field.trim().parse::<T>().map_err(|_| CsvError::BadRow {
        path: path.to_string(),
        line,
        detail: format!("cannot parse {what} from `{field}`"),
    })
}

fn split_row<'a>(
    row: &'a str,
    n: usize,
    path: &str,
    line: usize,
) -> Result<Vec<&'a str>, CsvError> {
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() != n {
        return Err(CsvError::BadRow {
            path: path.to_string(),
            line,
            detail: format!("expected {n} comma-separated fields, found {}", fields.len()),
        });
    }
    Ok(fields)
}

fn check_finite(v: f64, what: &str, path: &str, line: usize) -> Result<f64, CsvError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CsvError::BadRow {
            path: path.to_string(),
            line,
            detail: format!("{what} is not finite"),
        })
    }
}

/// Parse grouped-observation CSV (`group,index,value`). The group count is
/// inferred as `max(group) + 1`.
pub fn read_grouped_csv(path: &Path) -> Result<Dataset, CsvError> {
    let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_grouped_csv(&text, &path.display().to_string())
}

pub fn parse_grouped_csv(text: &str, path: &str) -> Result<Dataset, CsvError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| CsvError::BadHeader {
        path: path.to_string(),
        line: 1,
        expected: "group,index,value".into(),
        found: "<empty file>".into(),
    })?;
    if header.trim() != "group,index,value" {
        return Err(CsvError::BadHeader {
            path: path.to_string(),
            line: 1,
            expected: "group,index,value".into(),
            found: header.to_string(),
        });
    }
    let mut rows = Vec::new();
    let mut group_count = 0usize;
    for (idx, row) in lines {
        let line = idx + 1;
        if row.trim().is_empty() {
            continue;
        }
        let fields = split_row(row, 3, path, line)?;
        let group: usize = parse_field(fields[0], "group", path, line)?;
        let index: usize = parse_field(fields[1], "index", path, line)?;
        let value: f64 = parse_field(fields[2], "value", path, line)?;
        check_finite(value, "value", path, line)?;
        group_count = group_count.max(group + 1);
        rows.push(GroupedObs { group, index, value });
    }
    Ok(Dataset::Grouped { group_count, rows })
}

/// Parse pelt-series CSV (`year,hare_pelts,lynx_pelts`). Times are shifted so
/// the first year maps to t = 0.
pub fn read_pelt_csv(path: &Path) -> Result<Dataset, CsvError> {
    let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_pelt_csv(&text, &path.display().to_string())
}

pub fn parse_pelt_csv(text: &str, path: &str) -> Result<Dataset, CsvError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| CsvError::BadHeader {
        path: path.to_string(),
        line: 1,
        expected: "year,hare_pelts,lynx_pelts".into(),
        found: "<empty file>".into(),
    })?;
    if header.trim() != "year,hare_pelts,lynx_pelts" {
        return Err(CsvError::BadHeader {
            path: path.to_string(),
            line: 1,
            expected: "year,hare_pelts,lynx_pelts".into(),
            found: header.to_string(),
        });
    }
    let mut raw = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1;
        if row.trim().is_empty() {
            continue;
        }
        let fields = split_row(row, 3, path, line)?;
        let year: f64 = parse_field(fields[0], "year", path, line)?;
        let hare: f64 = parse_field(fields[1], "hare_pelts", path, line)?;
        let lynx: f64 = parse_field(fields[2], "lynx_pelts", path, line)?;
        check_finite(year, "year", path, line)?;
        check_finite(hare, "hare_pelts", path, line)?;
        check_finite(lynx, "lynx_pelts", path, line)?;
        if hare <= 0.0 || lynx <= 0.0 {
            return Err(CsvError::BadRow {
                path: path.to_string(),
                line,
                detail: "pelt counts must be positive".into(),
            });
        }
        raw.push((year, hare, lynx));
    }
    let t0 = raw.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let rows = raw
        .into_iter()
        .map(|(year, hare, lynx)| TimeObs { time: year - t0, hare, lynx })
        .collect();
    Ok(Dataset::TimeSeries { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grouped_roundtrip_and_shape() {
        let values: Vec<f64> = (0..250).map(|i| i as f64 / 10.0).collect();
        let d = Dataset::grouped_from_values(50, 5, &values);
        assert_eq!(d.len(), 250);
        let csv = d.to_csv_string();
        let back = parse_grouped_csv(&csv, "mem").unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn leading_fraction_takes_first_rows() {
        let values: Vec<f64> = (0..250).map(|i| i as f64).collect();
        let d = Dataset::grouped_from_values(50, 5, &values);
        let half = d.leading_fraction(0.5);
        assert_eq!(half.len(), 125);
        match half {
            Dataset::Grouped { rows, .. } => {
                assert_eq!(rows[124].value, 124.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn concat_with_empty_is_identity() {
        let y = Dataset::Scalar { values: vec![1.0, 2.0] };
        assert_eq!(Dataset::empty_scalar().concat(&y), y);
        assert_eq!(y.concat(&Dataset::empty_scalar()), y);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let text = "group,index,value\n0,0,1.5\n0,zzz,2\n";
        let err = parse_grouped_csv(text, "mem").unwrap_err();
        match err {
            CsvError::BadRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        let err = parse_pelt_csv("time,h,l\n0,1,1\n", "mem").unwrap_err();
        assert!(matches!(err, CsvError::BadHeader { .. }));
    }

    #[test]
    fn pelt_years_shift_to_zero() {
        let d = parse_pelt_csv(
            "year,hare_pelts,lynx_pelts\n1900,30,4\n1901,47.2,6.1\n",
            "mem",
        )
        .unwrap();
        match d {
            Dataset::TimeSeries { rows } => {
                assert_eq!(rows[0].time, 0.0);
                assert_eq!(rows[1].time, 1.0);
            }
            _ => unreachable!(),
        }
    }
}
