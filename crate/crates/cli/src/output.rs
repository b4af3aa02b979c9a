//! Deterministic CSV emission and run manifests.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use sodec_core::correlate::CorrelationGrid;
use sodec_core::evolve::DecoherenceCurve;

use crate::failure::Failure;

/// 17 significant digits: enough for an exact round trip of any f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects output files and writes the manifest last.
pub struct Run {
    command: String,
    out_dir: PathBuf,
    started: Instant,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    artifact_version: &'a str,
    parameters: Value,
    config_digest: Option<String>,
    outputs: &'a [String],
    report: Value,
    wall_time_seconds: f64,
    finished_unix_seconds: u64,
}

impl Run {
    pub fn new(command: &str, out_dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(out_dir)
            .map_err(|e| Failure::io(format!("cannot create {}: {e}", out_dir.display())))?;
        Ok(Self {
            command: command.to_owned(),
            out_dir: out_dir.to_owned(),
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    fn write_file(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<(), Failure> {
        let path = self.out_dir.join(name);
        let write = || -> std::io::Result<()> {
            let mut w = BufWriter::new(fs::File::create(&path)?);
            body(&mut w)?;
            w.flush()
        };
        write().map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(name.to_owned());
        Ok(())
    }

    /// Two columns: `T` and the factor.
    pub fn curve_csv(&mut self, name: &str, curve: &DecoherenceCurve) -> Result<(), Failure> {
        self.write_file(name, |w| {
            writeln!(w, "T,factor")?;
            for (t, f) in curve.times.iter().zip(&curve.factor) {
                writeln!(w, "{},{}", fmt_float(*t), fmt_float(*f))?;
            }
            Ok(())
        })
    }

    /// First row holds the `t'` values, first column the `t` values.
    pub fn grid_csv(&mut self, name: &str, grid: &CorrelationGrid) -> Result<(), Failure> {
        self.write_file(name, |w| {
            write!(w, "t\\t'")?;
            for tp in &grid.tprime_values {
                write!(w, ",{}", fmt_float(*tp))?;
            }
            writeln!(w)?;
            for (t, row) in grid.t_values.iter().zip(&grid.g) {
                write!(w, "{}", fmt_float(*t))?;
                for g in row {
                    write!(w, ",{}", fmt_float(*g))?;
                }
                writeln!(w)?;
            }
            Ok(())
        })
    }

    pub fn table_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<Option<f64>>],
    ) -> Result<(), Failure> {
        self.write_file(name, |w| {
            writeln!(w, "{}", header.join(","))?;
            for row in rows {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| c.map(fmt_float).unwrap_or_default())
                    .collect();
                writeln!(w, "{}", cells.join(","))?;
            }
            Ok(())
        })
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Failure::io(e.to_string()))?;
        self.write_file(name, |w| writeln!(w, "{text}"))
    }

    /// Writes `<command>_manifest.json` and returns its path.
    pub fn finish(
        mut self,
        parameters: Value,
        config_digest: Option<String>,
        report: Value,
    ) -> Result<PathBuf, Failure> {
        let name = format!("{}_manifest.json", self.command.replace('-', "_"));
        let manifest = RunManifest {
            command: &self.command,
            artifact_version: env!("CARGO_PKG_VERSION"),
            parameters,
            config_digest,
            outputs: &self.outputs,
            report,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            finished_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let text =
            serde_json::to_string_pretty(&manifest).map_err(|e| Failure::io(e.to_string()))?;
        let path = self.out_dir.join(&name);
        self.write_file(&name, |w| writeln!(w, "{text}"))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, 0.9999999999999999] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }
}
