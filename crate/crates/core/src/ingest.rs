//! CSV ingestion: numeric columns pass through, categorical columns are
//! one-hot encoded with the first (sorted) level dropped.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

const MISSING: [&str; 4] = ["", "NA", "NaN", "?"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub response: String,
    pub drop_missing: bool,
    /// Replace the response by its natural logarithm.
    #[serde(default)]
    pub log_response: bool,
    /// Prepend an all-ones column named `intercept`.
    #[serde(default = "default_true")]
    pub intercept: bool,
    /// Columns to ignore entirely.
    #[serde(default)]
    pub exclude: Vec<String>,
}

fn default_true() -> bool {
    true
}

impl IngestOptions {
    pub fn new(response: impl Into<String>) -> Self {
        Self { response: response.into(), drop_missing: true, log_response: false, intercept: true, exclude: Vec::new() }
    }
}

fn is_missing(field: &str) -> bool {
    MISSING.contains(&field.trim())
}

enum Column {
    Numeric(Vec<f64>),
    /// Sorted levels and the level index of each row.
    Categorical(Vec<String>, Vec<usize>),
}

pub fn ingest_csv(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_reader(file, opts)
}

/// All covariates land in `X₁`; repartition with [`partition`].
pub fn ingest_reader<R: Read>(reader: R, opts: &IngestOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let Some(resp) = header.iter().position(|h| *h == opts.response) else {
        return Err(Error::Schema(format!("response column {:?} not found", opts.response)));
    };
    for name in &opts.exclude {
        if !header.contains(name) {
            return Err(Error::Schema(format!("excluded column {name:?} not found")));
        }
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Schema(format!("row {} has {} fields, expected {}", rows.len() + 1, rec.len(), header.len())));
        }
        rows.push(rec.iter().map(|f| f.to_string()).collect());
    }
    let used: Vec<usize> = (0..header.len()).filter(|&j| !opts.exclude.contains(&header[j])).collect();
    let complete: Vec<&Vec<String>> = rows
        .iter()
        .filter(|r| !used.iter().any(|&j| is_missing(&r[j])))
        .collect();
    if complete.len() < rows.len() && !opts.drop_missing {
        return Err(Error::Schema(format!(
            "{} rows contain missing values; enable drop_missing",
            rows.len() - complete.len()
        )));
    }
    if complete.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = complete.len();

    let y: Vec<f64> = complete
        .iter()
        .map(|r| r[resp].trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Schema(format!("response column {:?} is not numeric", opts.response)))?;
    let y = if opts.log_response {
        if let Some(v) = y.iter().find(|v| **v <= 0.0) {
            return Err(Error::domain(format!("log response needs positive values, found {v}")));
        }
        y.iter().map(|v| v.ln()).collect()
    } else {
        y
    };

    let mut names = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if opts.intercept {
        names.push("intercept".to_string());
        cols.push(vec![1.0; n]);
    }
    let mut bad = Vec::new();
    for &j in used.iter().filter(|&&j| j != resp) {
        match classify(&complete, j) {
            Some(Column::Numeric(v)) => {
                names.push(header[j].clone());
                cols.push(v);
            }
            Some(Column::Categorical(levels, idx)) => {
                for (l, level) in levels.iter().enumerate().skip(1) {
                    names.push(format!("{}_{}", header[j], level));
                    cols.push(idx.iter().map(|&k| if k == l { 1.0 } else { 0.0 }).collect());
                }
            }
            None => bad.push(header[j].clone()),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Schema(format!("columns cannot be encoded: {}", bad.join(", "))));
    }
    let p = cols.len();
    let x = DMatrix::from_fn(n, p, |i, j| cols[j][i]);
    Dataset::with_names(DVector::from_vec(y), x, p, names)
}

/// Numeric when every entry parses; categorical when the column has at least
/// two labels and some label repeats.
fn classify(rows: &[&Vec<String>], j: usize) -> Option<Column> {
    let parsed: Option<Vec<f64>> = rows.iter().map(|r| r[j].trim().parse::<f64>().ok()).collect();
    if let Some(v) = parsed {
        return Some(Column::Numeric(v));
    }
    let mut levels: Vec<String> = rows.iter().map(|r| r[j].trim().to_string()).collect();
    levels.sort();
    levels.dedup();
    if levels.len() < 2 || levels.len() >= rows.len() {
        return None;
    }
    let idx = rows
        .iter()
        .map(|r| levels.binary_search(&r[j].trim().to_string()).expect("level present"))
        .collect();
    Some(Column::Categorical(levels, idx))
}

/// Moves the named columns (plus the intercept, when present) into `X₁`.
pub fn partition(data: &Dataset, sub: &[String]) -> Result<Dataset> {
    let names = data.names();
    let mut idx: Vec<usize> = data.intercept_column().into_iter().collect();
    let mut missing = Vec::new();
    for s in sub {
        match names.iter().position(|n| n == s) {
            Some(j) if !idx.contains(&j) => idx.push(j),
            Some(_) => {}
            None => missing.push(s.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Schema(format!("partition columns not found: {}", missing.join(", "))));
    }
    Dataset::from_partition(data.y().clone(), data.x().clone(), &idx, Some(names.to_vec()))
}

/// Writes `data` as CSV with the response first.
pub fn write_csv<W: std::io::Write>(data: &Dataset, response: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![response.to_string()];
    header.extend(data.names().iter().cloned());
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![data.y()[i].to_string()];
        rec.extend(data.x().row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> IngestOptions {
        IngestOptions { intercept: false, ..IngestOptions::new("y") }
    }

    #[test]
    fn three_row_round_trip() {
        let text = "y,a,b\n1,2,3\n4,5,6\n7,8.5,-9\n";
        let d = ingest_reader(text.as_bytes(), &opts()).unwrap();
        assert_eq!(d.y().as_slice(), &[1.0, 4.0, 7.0]);
        assert_eq!(d.x(), &DMatrix::from_row_slice(3, 2, &[2.0, 3.0, 5.0, 6.0, 8.5, -9.0]));
        let mut buf = Vec::new();
        write_csv(&d, "y", &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "y,a,b\n1,2,3\n4,5,6\n7,8.5,-9\n");
    }

    #[test]
    fn empty_file() {
        assert!(matches!(ingest_reader("y,a\n".as_bytes(), &opts()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn one_hot_drops_first_level() {
        let text = "y,g,x\n1,b,1\n2,a,2\n3,c,3\n4,a,4\n";
        let d = ingest_reader(text.as_bytes(), &opts()).unwrap();
        assert_eq!(d.names(), ["g_b", "g_c", "x"]);
        assert_eq!(d.x().column(0).as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.x().column(1).as_slice(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn missing_rows() {
        let text = "y,x\n1,2\n,3\nNA,4\n5,6\n";
        let d = ingest_reader(text.as_bytes(), &opts()).unwrap();
        assert_eq!(d.n(), 2);
        let strict = IngestOptions { drop_missing: false, ..opts() };
        assert!(matches!(ingest_reader(text.as_bytes(), &strict), Err(Error::Schema(_))));
    }

    #[test]
    fn unencodable_columns_are_listed() {
        let text = "y,id,x\n1,u1,1\n2,u2,2\n3,u3,3\n4,u4,4\n";
        match ingest_reader(text.as_bytes(), &opts()) {
            Err(Error::Schema(msg)) => assert!(msg.contains("id")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partition_by_name() {
        let text = "y,a,b,c\n1,2,3,4\n2,1,0,1\n3,5,2,2\n4,0,1,7\n5,3,3,1\n";
        let d = ingest_reader(text.as_bytes(), &IngestOptions::new("y")).unwrap();
        let part = partition(&d, &["c".into()]).unwrap();
        assert_eq!(part.names(), ["intercept", "c", "a", "b"]);
        assert_eq!(part.p1(), 2);
        assert!(matches!(partition(&d, &["zz".into()]), Err(Error::Schema(_))));
    }
}
