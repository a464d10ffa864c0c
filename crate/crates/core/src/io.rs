//! Output files: observables CSV, field snapshots and Wigner CSV matrices.
//!
//! A snapshot is two files: `<stem>.txt` with `key = value` lines (n, nx, a,
//! b, hbar, t) and `<stem>.bin` holding 2·(N+1)·Nx little-endian f64 values,
//! mode index outer, cell index inner, real and imaginary parts interleaved.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use crate::field::HermiteField;
use crate::grid::Grid1D;
use crate::observables::{wigner, WignerField};
use crate::scenario::Scenario;
use crate::simulation::{ObservableRecord, RunOutputs};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn observables_csv(records: &[ObservableRecord]) -> String {
    let mut s = String::from("t,norm,trace,kinetic_energy,d2,d4\n");
    for r in records {
        // `{:e}` prints the shortest representation that round-trips.
        let _ = writeln!(
            s,
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            r.t, r.norm, r.trace, r.kinetic_energy, r.d2, r.d4
        );
    }
    s
}

pub fn write_observables(path: &Path, records: &[ObservableRecord]) -> Result<(), IoError> {
    fs::write(path, observables_csv(records)).map_err(io_err(path))
}

pub fn read_observables(path: &Path) -> Result<Vec<ObservableRecord>, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    if lines.next() != Some("t,norm,trace,kinetic_energy,d2,d4") {
        return Err(format_err(path, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let v: Vec<f64> = line
                .split(',')
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| format_err(path, format!("line {}: {e}", i + 2)))?;
            if v.len() != 6 {
                return Err(format_err(path, format!("line {}: expected 6 columns", i + 2)));
            }
            Ok(ObservableRecord {
                t: v[0],
                norm: v[1],
                trace: v[2],
                kinetic_energy: v[3],
                d2: v[4],
                d4: v[5],
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub n: usize,
    pub nx: usize,
    pub a: f64,
    pub b: f64,
    pub hbar: f64,
    pub t: f64,
}

/// Writes `<stem>.txt` and `<stem>.bin`; returns the two paths.
pub fn write_snapshot(
    stem: &Path,
    header: &SnapshotHeader,
    field: &HermiteField,
) -> Result<(PathBuf, PathBuf), IoError> {
    let txt = stem.with_extension("txt");
    let bin = stem.with_extension("bin");
    let head = format!(
        "n = {}\nnx = {}\na = {:e}\nb = {:e}\nhbar = {:e}\nt = {:e}\n",
        header.n, header.nx, header.a, header.b, header.hbar, header.t
    );
    fs::write(&txt, head).map_err(io_err(&txt))?;
    let file = fs::File::create(&bin).map_err(io_err(&bin))?;
    let mut w = BufWriter::new(file);
    for z in field.as_slice() {
        w.write_all(&z.re.to_le_bytes()).map_err(io_err(&bin))?;
        w.write_all(&z.im.to_le_bytes()).map_err(io_err(&bin))?;
    }
    w.flush().map_err(io_err(&bin))?;
    Ok((txt, bin))
}

fn parse_header(path: &Path, text: &str) -> Result<SnapshotHeader, IoError> {
    let mut n = None;
    let mut nx = None;
    let mut vals = [None; 4];
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format_err(path, format!("malformed line `{line}`")))?;
        let v = v.trim();
        let bad = |e: &dyn std::fmt::Display| format_err(path, format!("{}: {e}", k.trim()));
        match k.trim() {
            "n" => n = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
            "nx" => nx = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
            key @ ("a" | "b" | "hbar" | "t") => {
                let i = ["a", "b", "hbar", "t"].iter().position(|&x| x == key).unwrap();
                vals[i] = Some(v.parse::<f64>().map_err(|e| bad(&e))?);
            }
            other => return Err(format_err(path, format!("unknown key `{other}`"))),
        }
    }
    let need = |o: Option<f64>, k: &str| o.ok_or_else(|| format_err(path, format!("missing `{k}`")));
    Ok(SnapshotHeader {
        n: n.ok_or_else(|| format_err(path, "missing `n`"))?,
        nx: nx.ok_or_else(|| format_err(path, "missing `nx`"))?,
        a: need(vals[0], "a")?,
        b: need(vals[1], "b")?,
        hbar: need(vals[2], "hbar")?,
        t: need(vals[3], "t")?,
    })
}

/// Reads a snapshot written by [`write_snapshot`]; `stem` may carry either
/// extension or none.
pub fn read_snapshot(stem: &Path) -> Result<(SnapshotHeader, HermiteField), IoError> {
    let txt = stem.with_extension("txt");
    let bin = stem.with_extension("bin");
    let text = fs::read_to_string(&txt).map_err(io_err(&txt))?;
    let header = parse_header(&txt, &text)?;
    let bytes = fs::read(&bin).map_err(io_err(&bin))?;
    let count = (header.n + 1) * header.nx;
    if bytes.len() != 16 * count {
        return Err(format_err(
            &bin,
            format!("expected {} bytes, found {}", 16 * count, bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    let field = HermiteField::from_data(header.n, header.nx, data).expect("length checked");
    Ok((header, field))
}

/// CSV matrix: header row `x,<ξ_0>,<ξ_1>,...`, then one row per cell.
pub fn wigner_csv(w: &WignerField) -> String {
    let mut s = String::from("x");
    for xi in &w.xi {
        let _ = write!(s, ",{xi:e}");
    }
    s.push('\n');
    for (j, x) in w.x.iter().enumerate() {
        let _ = write!(s, "{x:e}");
        for i in 0..w.xi.len() {
            let _ = write!(s, ",{:e}", w.get(j, i));
        }
        s.push('\n');
    }
    s
}

pub fn write_wigner(path: &Path, w: &WignerField) -> Result<(), IoError> {
    fs::write(path, wigner_csv(w)).map_err(io_err(path))
}

/// Snapshot file stem for time `t`, e.g. `field_t0003p200000`.
pub fn snapshot_stem(dir: &Path, t: f64) -> PathBuf {
    dir.join(format!("field_t{t:011.6}").replace('.', "p"))
}

/// Writes observables.csv, every snapshot and (if requested) its Wigner CSV.
/// Returns the written paths.
pub fn write_run_outputs(
    dir: &Path,
    scenario: &Scenario,
    grid: &Grid1D,
    outputs: &RunOutputs,
) -> Result<Vec<PathBuf>, IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let obs = dir.join("observables.csv");
    write_observables(&obs, &outputs.records)?;
    written.push(obs);
    for snap in &outputs.snapshots {
        let stem = snapshot_stem(dir, snap.t);
        let header = SnapshotHeader {
            n: snap.field.n(),
            nx: snap.field.nx(),
            a: grid.a(),
            b: grid.b(),
            hbar: scenario.hbar,
            t: snap.t,
        };
        let (txt, bin) = write_snapshot(&stem, &header, &snap.field)?;
        written.push(txt);
        written.push(bin);
        if scenario.output.wigner {
            let w = wigner(&snap.field, grid, &scenario.output.xi).map_err(|e| format_err(&stem, e.to_string()))?;
            let path = stem.with_file_name(format!(
                "wigner{}.csv",
                stem.file_name().unwrap().to_string_lossy().trim_start_matches("field")
            ));
            write_wigner(&path, &w)?;
            written.push(path);
        }
    }
    Ok(written)
}
