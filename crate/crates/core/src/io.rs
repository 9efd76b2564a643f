//! CSV and JSON readers and writers for datasets, bootstrap draws, limit
//! samples, coverage tables and histograms.
//!
//! Floats are written in their shortest round-trip form, so a value read
//! back is bit-identical and equal inputs give byte-identical files.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bootstrap::{BootstrapDistribution, BootstrapScheme};
use crate::limit::LimitSample;
use crate::model::Dataset;
use crate::{Error, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::InvalidDataset(e.to_string()),
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Reads a dataset with header `x1,...,xd,y`.
pub fn read_dataset_csv<R: Read>(r: R) -> Result<Dataset<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let cols = header.len();
    if cols < 3 {
        return Err(Error::InvalidDataset(format!("expected columns x1,...,xd,y with d >= 2, got {cols}")));
    }
    for (j, name) in header.iter().enumerate() {
        let want = if j + 1 == cols { "y".to_string() } else { format!("x{}", j + 1) };
        if name != want {
            return Err(Error::InvalidDataset(format!("column {} is named {name:?}, expected {want:?}", j + 1)));
        }
    }
    let d = cols - 1;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        for j in 0..d {
            let v: f64 = rec[j]
                .parse()
                .map_err(|_| Error::InvalidDataset(format!("row {}: cannot parse {:?}", i + 1, &rec[j])))?;
            x.push(v);
        }
        y.push(match &rec[d] {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::InvalidDataset(format!("row {}: response {other:?} is not 0 or 1", i + 1))),
        });
    }
    let data = Dataset::from_parts(d, x, y)?;
    data.ensure_valid()?;
    Ok(data)
}

pub fn write_dataset_csv<W: Write>(data: &Dataset<f64>, w: W) -> Result<()> {
    let mut wtr = writer(w);
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    wtr.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(|&v| fmt_f64(v)).collect();
        rec.push(data.y(i).to_string());
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Columns `rep,delta_1,...,delta_d`.
pub fn write_draws_csv<W: Write>(dist: &BootstrapDistribution<f64>, w: W) -> Result<()> {
    let mut wtr = writer(w);
    let mut header = vec!["rep".to_string()];
    header.extend((1..=dist.dim()).map(|j| format!("delta_{j}")));
    wtr.write_record(&header).map_err(csv_err)?;
    for (b, row) in dist.rows().enumerate() {
        let mut rec = vec![b.to_string()];
        rec.extend(row.iter().map(|&v| fmt_f64(v)));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawsMetadata {
    pub scheme: BootstrapScheme,
    #[serde(rename = "B")]
    pub replicates: usize,
    pub m: Option<usize>,
    pub seed: u64,
    pub center: Vec<f64>,
    pub rate: f64,
}

impl DrawsMetadata {
    pub fn new(dist: &BootstrapDistribution<f64>, n: usize, seed: u64) -> Self {
        let scheme = *dist.scheme();
        let m = matches!(scheme.kind, crate::bootstrap::SchemeKind::MOutOfN { .. }).then(|| scheme.resample_size(n));
        Self {
            scheme,
            replicates: dist.replicates(),
            m,
            seed,
            center: dist.center().components().to_vec(),
            rate: dist.rate(),
        }
    }
}

/// Column `s_star` for a one-dimensional law, `s_1,...,s_k` otherwise, plus
/// the reported first coordinate.
pub fn write_limit_csv<W: Write>(sample: &LimitSample, w: W) -> Result<()> {
    let mut wtr = writer(w);
    let k = sample.dim();
    let mut header: Vec<String> = if k == 1 {
        vec!["s_star".into()]
    } else {
        (1..=k).map(|j| format!("s_{j}")).collect()
    };
    header.push("first_coordinate".into());
    wtr.write_record(&header).map_err(csv_err)?;
    for b in 0..sample.replicates() {
        let mut rec: Vec<String> = sample.row(b).iter().map(|&v| fmt_f64(v)).collect();
        rec.push(fmt_f64(sample.first_coordinate()[b]));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes any serializable rows with their field names as header.
pub fn write_rows_csv<W: Write, S: Serialize>(rows: &[S], w: W) -> Result<()> {
    let mut wtr = writer(w);
    for r in rows {
        wtr.serialize(r).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read, S: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<S>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|rec| rec.map_err(csv_err))
        .collect()
}
