//! Writers for CSV tables, gnuplot matrix blocks, JSON reports and the run
//! manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::distributions::{Distribution1D, JointDistribution};
use crate::error::Result;

/// Fixed-precision float formatting so reruns are byte-identical.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.10e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Collects the files a subcommand writes, relative to the output directory.
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.create(name)?);
        w.write_record(header).map_err(csv_error)?;
        for row in rows {
            w.write_record(row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| crate::Error::Io(e.into()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// `x₁ x₂ P` lines with a blank line after each `x₁` row, as read by
    /// gnuplot `splot`. Axes are thinned to at most `max_points` and cut to
    /// `|x| ≤ window` when given.
    pub fn matrix(
        &mut self,
        name: &str,
        units: &str,
        joint: &JointDistribution,
        window: Option<(f64, f64)>,
        max_points: usize,
    ) -> Result<()> {
        let keep = |axis: &[f64]| -> Vec<usize> {
            let inside: Vec<usize> = (0..axis.len())
                .filter(|&i| window.is_none_or(|(lo, hi)| axis[i] >= lo - 1e-12 && axis[i] <= hi + 1e-12))
                .collect();
            let stride = inside.len().div_ceil(max_points.max(2)).max(1);
            inside.into_iter().step_by(stride).collect()
        };
        let rows = keep(&joint.axis1);
        let cols = keep(&joint.axis2);
        let mut w = self.create(name)?;
        writeln!(w, "# {units}")?;
        for &i in &rows {
            for &j in &cols {
                writeln!(w, "{} {} {}", num(joint.axis1[i]), num(joint.axis2[j]), num(joint.density[(i, j)]))?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Integer-indexed matrix block, `j l value`.
    pub fn site_matrix(
        &mut self,
        name: &str,
        units: &str,
        n: usize,
        value: impl Fn(usize, usize) -> f64,
    ) -> Result<()> {
        let mut w = self.create(name)?;
        writeln!(w, "# {units}")?;
        for j in 0..n {
            for l in 0..n {
                writeln!(w, "{j} {l} {}", num(value(j, l)))?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn distribution(&mut self, name: &str, header: &[&str], d: &Distribution1D) -> Result<()> {
        let rows: Vec<Vec<String>> = d.axis.iter().zip(&d.density).map(|(x, p)| vec![num(*x), num(*p)]).collect();
        self.csv(name, header, &rows)
    }
}

fn csv_error(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => crate::Error::Io(io),
        other => crate::Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub arguments: Vec<String>,
    pub config_path: Option<String>,
    /// SHA-256 of `effective_config`.
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub effective_config: String,
}
