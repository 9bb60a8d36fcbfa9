//! Text formats for snapshots, evolution records and scaling reports.
//!
//! Floats are written in Rust's shortest round-trip form, so files read
//! back bit-for-bit and are stable across platforms.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::diagnostics::ScalingReport;
use crate::error::{Error, Result};
use crate::propagators::EvolutionRecord;
use crate::quantum::{GridSpec, Wavefunction};

pub fn write_snapshot(path: &Path, psi: &Wavefunction) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = psi.grid();
    writeln!(w, "# hbar={}", psi.hbar())?;
    writeln!(w, "# xmin={}", g.x_min)?;
    writeln!(w, "# xmax={}", g.x_max)?;
    writeln!(w, "# n={}", g.n)?;
    writeln!(w, "x,re,im")?;
    for (j, a) in psi.amplitudes().iter().enumerate() {
        writeln!(w, "{},{},{}", g.x(j), a.re, a.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Wavefunction> {
    let reader = BufReader::new(File::open(path)?);
    let (mut hbar, mut x_min, mut x_max, mut n) = (None, None, None, None);
    let mut amplitudes = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("line {}: {what}", lineno + 1));
        if let Some(meta) = line.strip_prefix('#') {
            let (key, value) = meta.trim().split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let value = value.trim();
            match key.trim() {
                "hbar" => hbar = Some(parse_f64(value).ok_or_else(|| bad("bad hbar"))?),
                "xmin" => x_min = Some(parse_f64(value).ok_or_else(|| bad("bad xmin"))?),
                "xmax" => x_max = Some(parse_f64(value).ok_or_else(|| bad("bad xmax"))?),
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad("bad n"))?),
                _ => {}
            }
            continue;
        }
        if !header_seen {
            if line != "x,re,im" {
                return Err(bad("expected header x,re,im"));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad("expected three columns"));
        }
        let re = parse_f64(fields[1]).ok_or_else(|| bad("bad real part"))?;
        let im = parse_f64(fields[2]).ok_or_else(|| bad("bad imaginary part"))?;
        amplitudes.push(Complex64::new(re, im));
    }
    let missing = |k: &str| Error::Format(format!("missing `# {k}=` line"));
    let grid = GridSpec::new(
        x_min.ok_or_else(|| missing("xmin"))?,
        x_max.ok_or_else(|| missing("xmax"))?,
        n.ok_or_else(|| missing("n"))?,
    )?;
    if amplitudes.len() != grid.n {
        return Err(Error::Format(format!("{} rows for n = {}", amplitudes.len(), grid.n)));
    }
    Wavefunction::new(grid, hbar.ok_or_else(|| missing("hbar"))?, amplitudes)
}

fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}

/// `t,norm,re_autocorr,im_autocorr`, one row per recorded step, limited to
/// the first `rows` entries.
pub fn write_evolution_csv(path: &Path, record: &EvolutionRecord, rows: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,norm,re_autocorr,im_autocorr")?;
    for ((t, norm), a) in record.times.iter().zip(&record.norms).zip(&record.autocorrelation).take(rows) {
        writeln!(w, "{},{},{},{}", t, norm, a.re, a.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scaling_csv(path: &Path, report: &ScalingReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "hbar,value")?;
    for (h, v) in report.hbar.iter().zip(&report.values) {
        writeln!(w, "{h},{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scaling_json(path: &Path, report: &ScalingReport) -> Result<()> {
    let summary = serde_json::json!({ "exponent": report.exponent, "residual": report.residual });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{make_coherent_state, EnvelopeSpec};

    #[test]
    fn snapshot_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::new(-2.0, 2.0, 256).unwrap();
        let psi = make_coherent_state(grid, 3e-2, 0.1, 0.7, &EnvelopeSpec::StandardGaussian).unwrap();
        let path = dir.path().join("snap_0.csv");
        write_snapshot(&path, &psi).unwrap();
        let back = read_snapshot(&path).unwrap();
        assert_eq!(back, psi);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# hbar=0.03\n# xmin=-2\n# xmax=2\n# n=256\nx,re,im\n"));
    }

    #[test]
    fn malformed_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "# hbar=0.1\n# xmin=-1\n# xmax=1\n# n=64\nx,re,im\n0,1,2\n").unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Format(_))));
    }
}
