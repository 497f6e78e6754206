use std::fs;
use std::io::Write;
use std::path::Path;

use super::{OutputFormat, ResultRow};
use crate::edge::BinaryMap;
use crate::error::{Error, Result};
use crate::mask::{ratios, Measurements};

pub fn write_rows_csv<W: Write>(rows: &[ResultRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_rows(rows: &[ResultRow], path: &Path, format: OutputFormat) -> Result<()> {
    let bytes = match format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_rows_csv(rows, &mut buf)?;
            buf
        }
        OutputFormat::Json => {
            let mut v = serde_json::to_vec_pretty(rows)?;
            v.push(b'\n');
            v
        }
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Wall time per row, in the same order as the table.
pub fn write_timing_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut out = String::from("image,strategy,morph,eta1,eta2,seed,wall_time_s\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6}\n",
            r.image, r.strategy, r.morph, r.eta1, r.eta2, r.seed, r.wall_time_s
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reloads the persisted masks and measurements of one run and checks them
/// against its row: the union, both ratios, and the measurement support.
pub fn verify_run_dir(dir: &Path) -> Result<ResultRow> {
    let row_path = dir.join("row.json");
    let text = fs::read(&row_path).map_err(|e| Error::io(&row_path, e))?;
    let row: ResultRow = serde_json::from_slice(&text)?;
    if !dir.join("s_m.pbm").exists() {
        // dense-projection runs have no pixel masks
        return Ok(row);
    }
    let load = |name: &str| BinaryMap::load(dir.join(format!("{name}.pbm")));
    let (s_l, s_a, s_r, s_m) = (load("s_l")?, load("s_a")?, load("s_r")?, load("s_m")?);
    if s_l.union(&s_a)?.union(&s_r)? != s_m {
        return Err(Error::InvalidArgument(format!(
            "{}: s_m is not the union of its components",
            dir.display()
        )));
    }
    let (eta1, eta2) = ratios(&s_m, &s_r)?;
    if eta1 != row.eta1 || eta2 != row.eta2 {
        return Err(Error::InvalidArgument(format!(
            "{}: masks give ({eta1}, {eta2}) but the row says ({}, {})",
            dir.display(),
            row.eta1,
            row.eta2
        )));
    }
    let meas = Measurements::load(dir.join("measurements.bin"))?;
    if meas.support() != s_m {
        return Err(Error::InvalidArgument(format!(
            "{}: measurements do not match s_m",
            dir.display()
        )));
    }
    Ok(row)
}
