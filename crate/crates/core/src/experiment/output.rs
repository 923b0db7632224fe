//! CSV and metadata artifacts of a run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::adam::TraceRecord;
use crate::discretization::{BoundarySignal, SpaceTimeField};
use crate::error::{Error, Result};

/// Seventeen significant digits: enough to read every value back exactly.
pub(crate) fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// A space-time field as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldCsv {
    pub times: Vec<f64>,
    pub centers: Vec<f64>,
    pub values: SpaceTimeField,
}

/// Header `t,x_1,…,x_J` (cell centers), then one row per time.
pub fn field_csv(times: &[f64], centers: &[f64], values: &SpaceTimeField) -> String {
    let mut out = String::from("t");
    for x in centers {
        write!(out, ",{}", real(*x)).unwrap();
    }
    out.push('\n');
    for (n, t) in times.iter().enumerate() {
        out.push_str(&real(*t));
        for v in values.row(n) {
            write!(out, ",{}", real(*v)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn signal_csv(times: &[f64], signal: &BoundarySignal) -> String {
    let mut out = String::from("t,left,right\n");
    for (t, [l, r]) in times.iter().zip(signal.values()) {
        writeln!(out, "{},{},{}", real(*t), real(*l), real(*r)).unwrap();
    }
    out
}

pub fn trace_csv(records: &[TraceRecord]) -> String {
    let mut out = String::from("iter,cost,grad_norm_l2,grad_norm_max,kink_hits\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iter,
            real(r.cost),
            real(r.grad_norm_l2),
            real(r.grad_norm_max),
            r.kink_hits
        )
        .unwrap();
    }
    out
}

pub fn scan_csv(scan: &[(f64, f64)]) -> String {
    let mut out = String::from("amplitude,cost\n");
    for (s, c) in scan {
        writeln!(out, "{},{}", real(*s), real(*c)).unwrap();
    }
    out
}

fn parse_row(line: &str, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {lineno}: '{s}' is not a number"),
            })
        })
        .collect()
}

fn read_table(path: &Path) -> Result<(String, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().to_string();
    let rows = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_row(l, path, i + 2))
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

pub fn read_field_csv(path: &Path) -> Result<FieldCsv> {
    let (header, rows) = read_table(path)?;
    let centers = match header.split_once(',') {
        Some(("t", rest)) => parse_row(rest, path, 1)?,
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: "header must start with 't,'".into(),
            })
        }
    };
    let times = rows.iter().map(|r| r[0]).collect();
    let values = SpaceTimeField::from_rows(rows.into_iter().map(|r| r[1..].to_vec()).collect())?;
    if values.rows() > 0 && values.cols() != centers.len() {
        return Err(Error::Shape(format!("{}: rows do not match header", path.display())));
    }
    Ok(FieldCsv { times, centers, values })
}

pub fn read_signal_csv(path: &Path) -> Result<BoundarySignal> {
    let (_, rows) = read_table(path)?;
    rows.iter()
        .map(|r| match r.as_slice() {
            [_, l, rt] => Ok([*l, *rt]),
            _ => Err(Error::Shape(format!("{}: expected t,left,right", path.display()))),
        })
        .collect::<Result<Vec<_>>>()
        .map(BoundarySignal::from_values)
}

/// Paths of everything a run writes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub state_u: PathBuf,
    pub state_v: PathBuf,
    pub adjoint_phi: PathBuf,
    pub adjoint_psi: PathBuf,
    /// Controls of the lowest cost seen.
    pub control_f: PathBuf,
    pub control_g: PathBuf,
    /// Controls of the last evaluated iterate.
    pub control_f_last: PathBuf,
    pub control_g_last: PathBuf,
    pub target: PathBuf,
    pub trace: PathBuf,
    pub scan: PathBuf,
    pub config: PathBuf,
    pub metadata: PathBuf,
    /// The control that generated a manufactured target.
    pub reference_f: Option<PathBuf>,
}

impl RunArtifacts {
    pub fn in_dir(dir: &Path, with_reference: bool) -> Self {
        let p = |name: &str| dir.join(name);
        Self {
            dir: dir.to_path_buf(),
            state_u: p("state_u.csv"),
            state_v: p("state_v.csv"),
            adjoint_phi: p("adjoint_phi.csv"),
            adjoint_psi: p("adjoint_psi.csv"),
            control_f: p("control_f.csv"),
            control_g: p("control_g.csv"),
            control_f_last: p("control_f_last.csv"),
            control_g_last: p("control_g_last.csv"),
            target: p("target_ud.csv"),
            trace: p("trace.csv"),
            scan: p("scan.csv"),
            config: p("config.toml"),
            metadata: p("metadata.json"),
            reference_f: with_reference.then(|| p("reference_f.csv")),
        }
    }

    pub fn files(&self) -> Vec<&Path> {
        let mut all = vec![
            self.state_u.as_path(),
            &self.state_v,
            &self.adjoint_phi,
            &self.adjoint_psi,
            &self.control_f,
            &self.control_g,
            &self.control_f_last,
            &self.control_g_last,
            &self.target,
            &self.trace,
            &self.scan,
            &self.config,
            &self.metadata,
        ];
        all.extend(self.reference_f.as_deref());
        all
    }

    /// The CSV files; these are identical across reruns of the same spec.
    pub fn csv_files(&self) -> Vec<&Path> {
        self.files()
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub version: &'static str,
    pub preset: Option<String>,
    pub optimized: bool,
    pub termination: Option<String>,
    pub iterations: usize,
    pub best_iter: Option<usize>,
    pub initial_cost: f64,
    pub best_cost: f64,
    pub final_cost: f64,
    pub final_grad_norm_l2: f64,
    pub final_grad_norm_max: f64,
    pub tracking_misfit: f64,
    pub wall_ms_total: f64,
    pub wall_ms_per_iter: f64,
    pub spec: super::ExperimentSpec,
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let values = SpaceTimeField::from_fn(3, 4, |n, j| (n as f64 + 0.1).powf(j as f64 + 0.37) / 3.0);
        let times = [0.0, 1.0 / 3.0, 2.0 / 3.0];
        let centers = [-0.75, -0.25, 0.25, 0.1 + 0.2];
        write_file(&path, &field_csv(&times, &centers, &values)).unwrap();
        let back = read_field_csv(&path).unwrap();
        assert_eq!(back.values, values);
        assert_eq!(back.times, times);
        assert_eq!(back.centers, centers);
    }

    #[test]
    fn signal_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let g = BoundarySignal::from_values(vec![[0.1, -1e-300], [std::f64::consts::PI, 7.0]]);
        write_file(&path, &signal_csv(&[0.5, 1.0], &g)).unwrap();
        assert_eq!(read_signal_csv(&path).unwrap(), g);
    }

    #[test]
    fn bad_number_is_located() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_file(&path, "t,0.5\n0,1\n1,x\n").unwrap();
        let msg = read_field_csv(&path).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }
}
