//! CSV helpers. Floats are written with Rust's shortest round-trip
//! formatting, so re-reading reproduces every value exactly.

use std::path::Path;

use super::atomic_write;
use crate::error::{Error, Result};
use crate::probe::LayerProbe;

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Validation(format!("csv buffer: {e}")))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(f))
}

fn check_header(r: &mut csv::Reader<std::fs::File>, expected: &[&str], path: &Path) -> Result<()> {
    let h = r.headers()?;
    if h.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Validation(format!(
            "{}: expected columns {expected:?}, found {:?}",
            path.display(),
            h.iter().collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// Probes as `layer,t,value` rows, one per sample.
pub fn write_probe_csv(path: &Path, probes: &[LayerProbe]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["layer", "t", "value"])?;
    for p in probes {
        for (t, v) in p.series.iter().enumerate() {
            w.write_record([p.layer_index.to_string(), t.to_string(), v.to_string()])?;
        }
    }
    atomic_write(path, &finish(w)?)
}

/// Inverse of [`write_probe_csv`]: `(layer, series)` in file order.
pub fn read_probe_csv(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut r = reader(path)?;
    check_header(&mut r, &["layer", "t", "value"], path)?;
    let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
    for rec in r.deserialize::<(usize, usize, f64)>() {
        let (layer, t, v) = rec?;
        match out.last_mut() {
            Some((l, s)) if *l == layer && s.len() == t => s.push(v),
            _ if t == 0 => out.push((layer, vec![v])),
            _ => return Err(Error::Validation(format!("{}: samples out of order", path.display()))),
        }
    }
    Ok(out)
}

/// Track as `time,value`; unvoiced frames leave `value` empty.
pub fn write_track_csv(path: &Path, times: &[f64], values: &[Option<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "value"])?;
    for (t, v) in times.iter().zip(values) {
        w.write_record([t.to_string(), v.map(|x| x.to_string()).unwrap_or_default()])?;
    }
    atomic_write(path, &finish(w)?)
}

pub fn read_track_csv(path: &Path) -> Result<(Vec<f64>, Vec<Option<f64>>)> {
    let mut r = reader(path)?;
    check_header(&mut r, &["time", "value"], path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.deserialize::<(f64, Option<f64>)>() {
        let (t, v) = rec?;
        times.push(t);
        values.push(v);
    }
    Ok((times, values))
}

/// One numeric column under `header`.
pub fn write_series_csv(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([header])?;
    for v in values {
        w.write_record([v.to_string()])?;
    }
    atomic_write(path, &finish(w)?)
}

pub fn read_series_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = reader(path)?;
    r.headers()?;
    r.deserialize::<(f64,)>().map(|rec| Ok(rec?.0)).collect()
}

/// Matrix with a header row `c0,c1,…`.
pub fn write_matrix(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Dimension("matrix rows differ in length".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record((0..width).map(|j| format!("c{j}")))?;
    for r in rows {
        w.write_record(r.iter().map(f64::to_string))?;
    }
    atomic_write(path, &finish(w)?)
}

pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = reader(path)?;
    let width = r.headers()?.len();
    let rows: Vec<Vec<f64>> = r.deserialize::<Vec<f64>>().collect::<std::result::Result<_, _>>()?;
    if rows.iter().any(|row| row.len() != width) {
        return Err(Error::Dimension(format!("{}: ragged matrix", path.display())));
    }
    Ok(rows)
}

/// Cluster assignments as `map_index,cluster`.
pub fn write_assignments(path: &Path, assignments: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["map_index", "cluster"])?;
    for (i, c) in assignments.iter().enumerate() {
        w.write_record([i.to_string(), c.to_string()])?;
    }
    atomic_write(path, &finish(w)?)
}
