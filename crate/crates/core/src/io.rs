//! Run directories, CSV tables, the `key: value` report and the binary
//! snapshot format.
//!
//! A snapshot is one JSON header line followed by `nx·nz` little-endian
//! `f64` values, row-major with `x` outer.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CoordMode, Field, Grid};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub version: u32,
    pub nx: usize,
    pub nz: usize,
    pub lx: f64,
    pub zmax: f64,
    pub mode: String,
    pub stretch: f64,
    pub t: f64,
    pub field: String,
}

impl SnapshotHeader {
    pub fn for_field(grid: &Grid, f: &Field, name: &str) -> Self {
        Self {
            version: SNAPSHOT_VERSION,
            nx: grid.nx(),
            nz: grid.nz(),
            lx: grid.lx(),
            zmax: grid.zmax(),
            mode: grid.mode().to_string(),
            stretch: grid.config().stretch,
            t: f.time(),
            field: name.to_string(),
        }
    }
}

pub fn save_snapshot(path: &Path, grid: &Grid, f: &Field, name: &str) -> Result<()> {
    grid.check(f)?;
    let header = serde_json::to_string(&SnapshotHeader::for_field(grid, f, name))
        .map_err(|e| Error::Snapshot(format!("header encoding: {e}")))?;
    let mut buf = Vec::with_capacity(header.len() + 1 + 8 * f.values().len());
    buf.extend_from_slice(header.as_bytes());
    buf.push(b'\n');
    for v in f.values().iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Header and values without reference to a grid.
pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, Array2<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if !line.ends_with('\n') {
        return Err(Error::Snapshot(format!("{}: header line is not terminated", path.display())));
    }
    let header: SnapshotHeader = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Snapshot(format!("{}: bad header: {e}", path.display())))?;
    if header.version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!(
            "version mismatch: file has {}, reader expects {SNAPSHOT_VERSION}",
            header.version
        )));
    }
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let want = 8 * header.nx * header.nz;
    if payload.len() != want {
        return Err(Error::Snapshot(format!(
            "payload-length: {} bytes, header implies {want}",
            payload.len()
        )));
    }
    let vals: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let arr = Array2::from_shape_vec((header.nx, header.nz), vals).expect("length checked above");
    Ok((header, arr))
}

/// Loads a snapshot onto `grid`, refusing any mismatch in the grid
/// description.
pub fn load_snapshot(path: &Path, grid: &Grid) -> Result<(Field, SnapshotHeader)> {
    let (h, arr) = read_snapshot(path)?;
    let mode: CoordMode = h.mode.parse().map_err(|_| Error::Snapshot(format!("unknown mode '{}'", h.mode)))?;
    if mode != grid.mode() {
        return Err(Error::Snapshot(format!("mode mismatch: snapshot is {mode}, grid is {}", grid.mode())));
    }
    let c = grid.config();
    if h.nx != c.nx || h.nz != c.nz || h.lx != c.lx || h.zmax != c.zmax || h.stretch != c.stretch {
        return Err(Error::Snapshot(format!(
            "grid mismatch: snapshot {}x{} lx={} zmax={} stretch={}, grid {}x{} lx={} zmax={} stretch={}",
            h.nx, h.nz, h.lx, h.zmax, h.stretch, c.nx, c.nz, c.lx, c.zmax, c.stretch
        )));
    }
    let f = Field::new(grid, arr, h.t).map_err(|e| Error::Snapshot(e.to_string()))?;
    Ok((f, h))
}

/// A CSV table with a fixed header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Shortest round-trip formatting, so parsing returns identical bits.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| Error::InvalidArgument("empty csv".into()))?;
        let columns: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (n, l) in lines.enumerate() {
            if l.trim().is_empty() {
                continue;
            }
            let row = l
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidArgument(format!("csv line {}: {e}", n + 2)))?;
            if row.len() != columns.len() {
                return Err(Error::InvalidArgument(format!(
                    "csv line {}: {} fields, header has {}",
                    n + 2,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse_csv(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Ordered `key: value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn add(&mut self, key: &str, value: impl ToString) {
        let v = value.to_string();
        debug_assert!(!key.contains(':') && !v.contains('\n'));
        self.entries.push((key.to_string(), v));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, l) in text.lines().enumerate() {
            if l.trim().is_empty() {
                continue;
            }
            let (k, v) = l
                .split_once(": ")
                .ok_or_else(|| Error::InvalidArgument(format!("report line {}: expected 'key: value'", n + 1)))?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.entries.iter().cloned().collect()
    }
}

/// `<base>/run-<id>/` with its `snapshots/` directory.
pub fn create_run_dir(base: &Path, run_id: &str) -> Result<PathBuf> {
    let dir = base.join(format!("run-{run_id}"));
    fs::create_dir_all(dir.join("snapshots"))?;
    Ok(dir)
}

/// `g_t000012.500000.fld`.
pub fn snapshot_name(field: &str, t: f64) -> String {
    format!("{field}_t{t:013.6}.fld")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, GridConfig};

    fn field(grid: &Grid) -> Field {
        Field::from_fn_z(grid, 1.25, |x, z| x.sin() * (-z * z).exp() + 1e-300 * z).unwrap()
    }

    #[test]
    fn snapshot_roundtrip_is_bitwise() {
        let grid = make_grid(GridConfig::default()).unwrap();
        let f = field(&grid);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.fld");
        save_snapshot(&p, &grid, &f, "g").unwrap();
        let (back, h) = load_snapshot(&p, &grid).unwrap();
        assert_eq!(h.field, "g");
        assert_eq!(back.time(), 1.25);
        assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncated_payload_rejected() {
        let grid = make_grid(GridConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.fld");
        save_snapshot(&p, &grid, &field(&grid), "g").unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        let e = load_snapshot(&p, &grid).unwrap_err().to_string();
        assert!(e.contains("payload-length"), "{e}");
    }

    #[test]
    fn mode_and_version_mismatch_rejected() {
        let grid = make_grid(GridConfig::default()).unwrap();
        let other = make_grid(GridConfig { mode: CoordMode::PhysicalY, ..GridConfig::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.fld");
        save_snapshot(&p, &grid, &field(&grid), "g").unwrap();
        let e = load_snapshot(&p, &other).unwrap_err().to_string();
        assert!(e.contains("mode mismatch"), "{e}");
        let text = fs::read(&p).unwrap();
        let s = String::from_utf8_lossy(&text[..text.iter().position(|b| *b == b'\n').unwrap()]).to_string();
        let bumped = s.replace("\"version\":1", "\"version\":2");
        let mut out = bumped.into_bytes();
        out.extend_from_slice(&text[s.len()..]);
        fs::write(&p, out).unwrap();
        let e = load_snapshot(&p, &grid).unwrap_err().to_string();
        assert!(e.contains("version mismatch"), "{e}");
    }

    #[test]
    fn csv_and_report_roundtrip() {
        let mut t = Table::new(&["t", "x"]);
        t.push(vec![0.1, 1.0 / 3.0]);
        t.push(vec![0.2, f64::MIN_POSITIVE]);
        let back = Table::parse_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("x").unwrap()[0].to_bits(), (1.0f64 / 3.0).to_bits());
        assert!(Table::parse_csv("a,b\n1\n").is_err());

        let mut r = Report::default();
        r.add("termination", "t_end");
        r.add("decay_slope", -1.2);
        let back = Report::parse(&r.render()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.get("termination"), Some("t_end"));
    }
}
