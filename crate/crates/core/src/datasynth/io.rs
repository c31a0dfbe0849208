//! Dataset CSV with JSON sidecar, and the raw-segment binary format.
//!
//! Raw segment record, little endian, 4024 bytes:
//! `i64` click time in ns, `u64` segment index, `u32` flags, `u32` reserved
//! (zero), then 1000 `f32` samples.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::segment::{RawSegment, SEGMENT_LEN};
use super::{DatasetMetadata, PhasePlan, QuadratureDataset};
use crate::error::{Error, Result};
use crate::fock::CONVENTION;

pub const SEGMENT_HEADER_BYTES: usize = 24;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    metadata: DatasetMetadata,
    vacuum_scale: f64,
    records: usize,
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `theta_rad,x` rows (values as stored, uncalibrated).
pub fn write_csv(path: &Path, thetas: &[f64], xs: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "theta_rad,x")?;
    for (t, x) in thetas.iter().zip(xs) {
        writeln!(w, "{t:e},{x:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "theta_rad,x" {
        return Err(Error::Format(format!(
            "{}: expected header `theta_rad,x`, found `{header}`",
            path.display()
        )));
    }
    let mut thetas = Vec::new();
    let mut xs = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Format(format!("{}: bad record on line {}", path.display(), i + 2)))
        };
        let mut parts = line.split(',');
        thetas.push(parse(parts.next())?);
        xs.push(parse(parts.next())?);
    }
    Ok((thetas, xs))
}

/// CSV plus sidecar `<name>.json` carrying metadata and calibration.
pub fn write_dataset(path: &Path, ds: &QuadratureDataset) -> Result<()> {
    write_csv(path, &ds.thetas, &ds.xs)?;
    let side = Sidecar {
        metadata: ds.metadata.clone(),
        vacuum_scale: ds.vacuum_scale,
        records: ds.len(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(())
}

/// Reads a dataset; without a sidecar the metadata is a neutral default
/// and the calibration scale is 1.
pub fn read_dataset(path: &Path) -> Result<QuadratureDataset> {
    let (thetas, xs) = read_csv(path)?;
    let side = sidecar_path(path);
    let (metadata, scale) = if side.exists() {
        let s: Sidecar = serde_json::from_str(&std::fs::read_to_string(&side)?)?;
        if s.records != xs.len() {
            return Err(Error::Format(format!(
                "{}: sidecar lists {} records, CSV has {}",
                side.display(),
                s.records,
                xs.len()
            )));
        }
        (s.metadata, s.vacuum_scale)
    } else {
        (
            DatasetMetadata {
                seed: 0,
                kind: "external".into(),
                eta_det: 1.0,
                phase_plan: PhasePlan::Fixed { theta: 0.0 },
                phase_span_rad: 0.0,
                model_hash: None,
                mode: None,
                convention: CONVENTION.into(),
            },
            1.0,
        )
    };
    let mut ds = QuadratureDataset::from_records(thetas, xs, metadata)?;
    ds.vacuum_scale = scale;
    Ok(ds)
}

pub fn write_segments(path: &Path, segments: &[RawSegment]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in segments {
        s.validate()?;
        w.write_i64::<LittleEndian>(s.click_time_ns)?;
        w.write_u64::<LittleEndian>(s.index)?;
        w.write_u32::<LittleEndian>(s.flags)?;
        w.write_u32::<LittleEndian>(0)?;
        for &v in &s.samples {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_segments(path: &Path) -> Result<Vec<RawSegment>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let record = SEGMENT_HEADER_BYTES + 4 * SEGMENT_LEN;
    if bytes.len() % record != 0 {
        return Err(Error::Format(format!(
            "{}: size {} is not a multiple of the {record}-byte record",
            path.display(),
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(bytes.len() / record);
    let mut r = &bytes[..];
    while !r.is_empty() {
        let click_time_ns = r.read_i64::<LittleEndian>()?;
        let index = r.read_u64::<LittleEndian>()?;
        let flags = r.read_u32::<LittleEndian>()?;
        let _reserved = r.read_u32::<LittleEndian>()?;
        let mut samples = Vec::with_capacity(SEGMENT_LEN);
        for _ in 0..SEGMENT_LEN {
            samples.push(r.read_f32::<LittleEndian>()? as f64);
        }
        out.push(RawSegment {
            index,
            click_time_ns,
            flags,
            samples,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::sample_vacuum;
    use super::*;

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let plan = PhasePlan::LinearScan {
            scan_rate_rad_s: 3.0,
            click_rate_hz: 1e4,
            jitter_rad: 0.0,
        };
        let ds = sample_vacuum(50, &plan, 1.3, 1).unwrap().with_vacuum_scale(0.77);
        let p = dir.path().join("d.csv");
        write_dataset(&p, &ds).unwrap();
        let back = read_dataset(&p).unwrap();
        assert_eq!(back.xs, ds.xs);
        assert_eq!(back.thetas, ds.thetas);
        assert_eq!(back.metadata, ds.metadata);
        assert_eq!(back.vacuum_scale, 0.77);
    }

    #[test]
    fn segment_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let seg = RawSegment {
            index: 7,
            click_time_ns: -3,
            flags: 2,
            samples: (0..SEGMENT_LEN).map(|i| i as f64 * 0.25).collect(),
        };
        let p = dir.path().join("s.bin");
        write_segments(&p, &[seg.clone(), seg.clone()]).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 2 * 4024);
        let back = read_segments(&p).unwrap();
        assert_eq!(back, vec![seg.clone(), seg]);
    }
}
