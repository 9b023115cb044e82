//! Path files: the `FBM1` binary dump and `t,value` CSV.
//!
//! `FBM1` layout, all little-endian: magic `b"FBM1"`, then `h`, `t0`, `dt` as
//! `f64`, `n` as `u64`, then `n` values as `f64`.

use anyhow::{bail, ensure, Context, Result};
use fbmest_core::Process;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"FBM1";

/// Contents of an `FBM1` file. `h` is NaN for paths that are not fBm samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDump {
    pub h: f64,
    pub process: Process,
}

pub fn write_fbm1(w: &mut impl Write, h: f64, p: &Process) -> Result<()> {
    w.write_all(MAGIC)?;
    for v in [h, p.t0, p.dt] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(p.values.len() as u64).to_le_bytes())?;
    for v in &p.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_fbm1(r: &mut impl Read) -> Result<PathDump> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).context("reading magic")?;
    if &magic != MAGIC {
        bail!("not an FBM1 file (magic {:?})", magic);
    }
    let h = read_f64(r)?;
    let t0 = read_f64(r)?;
    let dt = read_f64(r)?;
    let mut nb = [0u8; 8];
    r.read_exact(&mut nb)?;
    let n = u64::from_le_bytes(nb) as usize;
    ensure!(dt > 0.0, "FBM1 header has non-positive dt {dt}");
    let mut values = Vec::with_capacity(n.min(1 << 24));
    for i in 0..n {
        values.push(read_f64(r).with_context(|| format!("truncated FBM1 body at value {i} of {n}"))?);
    }
    Ok(PathDump { h, process: Process { t0, dt, values } })
}

pub fn save_fbm1(path: &Path, h: f64, p: &Process) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_fbm1(&mut w, h, p)?;
    w.flush()?;
    Ok(())
}

pub fn load_fbm1(path: &Path) -> Result<PathDump> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    read_fbm1(&mut r)
}

/// Writes `t,value` rows.
pub fn write_path_csv(w: impl Write, p: &Process) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "value"])?;
    for (i, v) in p.values.iter().enumerate() {
        out.write_record([format!("{}", p.time(i)), format!("{v}")])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a `t,value` CSV; the grid must be uniform.
pub fn read_path_csv(r: impl Read) -> Result<Process> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut ts = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        ensure!(rec.len() == 2, "expected two columns, found {}", rec.len());
        ts.push(rec[0].trim().parse::<f64>().context("column t")?);
        values.push(rec[1].trim().parse::<f64>().context("column value")?);
    }
    ensure!(ts.len() >= 2, "a path needs at least two rows");
    let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
    ensure!(dt > 0.0, "times must increase");
    for (i, t) in ts.iter().enumerate() {
        ensure!((t - (ts[0] + i as f64 * dt)).abs() <= 1e-6 * dt, "grid is not uniform at row {i}");
    }
    Ok(Process { t0: ts[0], dt, values })
}
