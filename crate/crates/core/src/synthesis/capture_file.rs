//! `.cf32` capture files: interleaved little-endian `f32` I/Q pairs, with a
//! JSON sidecar of the same basename holding the capture metadata.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CaptureMetadata, Frequency, IqCapture};

pub const SIDECAR_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureSidecar {
    pub schema: u32,
    pub center_freq_hz: f64,
    pub sample_rate_hz: f64,
    pub rx_id: String,
    pub rx_gain_db: f64,
    pub scenario_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

fn data_path(path: &Path) -> PathBuf {
    path.with_extension("cf32")
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `<path>.cf32` and `<path>.json`.
pub fn write_capture(c: &IqCapture, path: &Path) -> Result<()> {
    c.validate()?;
    let mut out = BufWriter::new(fs::File::create(data_path(path))?);
    for s in &c.samples {
        out.write_all(&(s.re as f32).to_le_bytes())?;
        out.write_all(&(s.im as f32).to_le_bytes())?;
    }
    out.flush()?;

    let sidecar = CaptureSidecar {
        schema: SIDECAR_SCHEMA,
        center_freq_hz: c.center_frequency.hz(),
        sample_rate_hz: c.sample_rate,
        rx_id: c.metadata.rx_id.clone(),
        rx_gain_db: c.metadata.rx_gain_db,
        scenario_hash: c.metadata.scenario_hash.clone(),
        seed: c.metadata.seed,
        timestamp: c.metadata.timestamp.clone(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Decodes interleaved little-endian `f32` pairs.
pub fn decode_cf32(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::TruncatedFile {
            len: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(f64::from(re), f64::from(im))
        })
        .collect())
}

/// Reads a capture written by [`write_capture`].
pub fn read_capture(path: &Path) -> Result<IqCapture> {
    let bytes = fs::read(data_path(path))?;
    let samples = decode_cf32(&bytes)?;
    if samples.is_empty() {
        return Err(Error::TruncatedFile { len: 0 });
    }

    let side_path = sidecar_path(path);
    let text = match fs::read_to_string(&side_path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingSidecar(side_path))
        }
        Err(e) => return Err(e.into()),
    };
    let side: CaptureSidecar =
        serde_json::from_str(&text).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
    if side.schema != SIDECAR_SCHEMA {
        return Err(Error::SchemaMismatch(format!(
            "schema {} (expected {SIDECAR_SCHEMA})",
            side.schema
        )));
    }
    let center = Frequency::from_hz(side.center_freq_hz)
        .map_err(|e| Error::SchemaMismatch(e.to_string()))?;

    IqCapture::new(
        center,
        side.sample_rate_hz,
        samples,
        CaptureMetadata {
            rx_id: side.rx_id,
            rx_gain_db: side.rx_gain_db,
            scenario_hash: side.scenario_hash,
            seed: side.seed,
            timestamp: side.timestamp,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn capture(samples: Vec<Complex64>) -> IqCapture {
        IqCapture::new(
            Frequency::from_mhz(910.0).unwrap(),
            1e6,
            samples,
            CaptureMetadata {
                rx_id: "RX1".into(),
                rx_gain_db: 30.0,
                scenario_hash: "abc".into(),
                seed: 7,
                timestamp: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn single_sample_layout() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("one");
        write_capture(&capture(vec![Complex64::new(1.0, -0.5)]), &base).unwrap();
        let bytes = fs::read(dir.path().join("one.cf32")).unwrap();
        let mut want = 1.0f32.to_le_bytes().to_vec();
        want.extend((-0.5f32).to_le_bytes());
        assert_eq!(bytes, want);
        assert!(dir.path().join("one.json").exists());
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("bad");
        write_capture(&capture(vec![Complex64::new(1.0, 2.0)]), &base).unwrap();
        fs::write(dir.path().join("bad.cf32"), [0u8; 7]).unwrap();
        assert!(matches!(read_capture(&base), Err(Error::TruncatedFile { len: 7 })));
    }

    #[test]
    fn missing_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("lonely.cf32"), [0u8; 8]).unwrap();
        assert!(matches!(
            read_capture(&dir.path().join("lonely")),
            Err(Error::MissingSidecar(_))
        ));
    }

    #[test]
    fn schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("s");
        write_capture(&capture(vec![Complex64::new(1.0, 2.0)]), &base).unwrap();
        fs::write(dir.path().join("s.json"), r#"{"schema": 2}"#).unwrap();
        assert!(matches!(read_capture(&base), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn metadata_survives() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("m.cf32");
        let c = capture(vec![Complex64::new(0.25, 0.125); 20]);
        write_capture(&c, &base).unwrap();
        assert_eq!(read_capture(&base).unwrap(), c);
    }
}
