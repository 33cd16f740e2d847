//! `.qds` dataset files.
//!
//! Little-endian: magic "QSTD", u32 version, u32 n_examples, u32 seq_len,
//! u8 schedule_id, u8 label_count (= 3), 2 reserved zero bytes; then per
//! example r, theta, nbar as f64 followed by seq_len f32 samples.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{Dataset, PhaseSchedule, SAMPLE_LIMIT};
use crate::binio::LeReader;
use crate::error::{Error, Result};
use crate::gaussian::StateParams;

pub const DATASET_MAGIC: [u8; 4] = *b"QSTD";
pub const DATASET_VERSION: u32 = 1;
const LABEL_COUNT: u8 = 3;

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    let mut header = Vec::with_capacity(20);
    header.extend_from_slice(&DATASET_MAGIC);
    header.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    header.extend_from_slice(&(ds.len() as u32).to_le_bytes());
    header.extend_from_slice(&(ds.seq_len() as u32).to_le_bytes());
    header.extend_from_slice(&[ds.schedule_id(), LABEL_COUNT, 0, 0]);
    w.write_all(&header).map_err(io)?;

    let mut record = Vec::with_capacity(24 + 4 * ds.seq_len());
    for i in 0..ds.len() {
        record.clear();
        let p = ds.label(i);
        for v in [p.r(), p.theta(), p.nbar()] {
            record.extend_from_slice(&v.to_le_bytes());
        }
        for v in ds.sequence(i) {
            record.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&record).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = LeReader::new(BufReader::new(file), path);
    r.expect_magic(DATASET_MAGIC)?;
    let version = r.u32("version")?;
    if version != DATASET_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n = r.u32("example count")? as usize;
    let seq_len = r.u32("sequence length")? as usize;
    let schedule_id = r.u8("schedule id")?;
    PhaseSchedule::from_id(schedule_id)?;
    let label_count = r.u8("label count")?;
    if label_count != LABEL_COUNT {
        return Err(Error::Corrupt(format!(
            "label count {label_count}, expected {LABEL_COUNT}"
        )));
    }
    let reserved = r.bytes::<2>("reserved bytes")?;
    if reserved != [0, 0] {
        return Err(Error::Corrupt(format!(
            "reserved header bytes {reserved:?}"
        )));
    }
    if seq_len == 0 && n > 0 {
        return Err(Error::Corrupt("zero sequence length".into()));
    }

    // Grow as records arrive so a lying header cannot force a huge allocation.
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut raw = vec![0u8; seq_len * 4];
    for i in 0..n {
        let what = format!("example {i}");
        let (rr, theta, nbar) = (r.f64(&what)?, r.f64(&what)?, r.f64(&what)?);
        let p = StateParams::new(rr, theta, nbar)
            .map_err(|e| Error::Corrupt(format!("example {i} label: {e}")))?;
        if p.theta().to_bits() != theta.to_bits() {
            return Err(Error::Corrupt(format!(
                "example {i} angle {theta} outside [0, pi)"
            )));
        }
        labels.push(p);
        r.fill(&mut raw, &what)?;
        for c in raw.chunks_exact(4) {
            let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if !(v.is_finite() && (v as f64).abs() <= SAMPLE_LIMIT) {
                return Err(Error::Corrupt(format!(
                    "example {i} sample {v} out of range"
                )));
            }
            values.push(v);
        }
    }
    r.expect_end()?;
    Ok(Dataset::from_parts(seq_len, schedule_id, labels, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, GenConfig};

    fn three_examples() -> Dataset {
        generate_dataset(&GenConfig {
            n_examples: 3,
            seq_len: 32,
            global_seed: 3,
            ..GenConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.qds");
        let ds = three_examples();
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, ds);
        let path2 = dir.path().join("b.qds");
        write_dataset(&back, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
        assert_eq!(
            std::fs::metadata(&path).unwrap().len(),
            20 + 3 * (24 + 32 * 4)
        );
    }

    fn patched(offset: usize, bytes: &[u8]) -> Result<Dataset> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.qds");
        write_dataset(&three_examples(), &path).unwrap();
        let mut raw = std::fs::read(&path).unwrap();
        raw[offset..offset + bytes.len()].copy_from_slice(bytes);
        std::fs::write(&path, raw).unwrap();
        read_dataset(&path)
    }

    #[test]
    fn corrupt_magic() {
        assert!(matches!(patched(0, b"XSTD"), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn future_version() {
        assert!(matches!(
            patched(4, &99u32.to_le_bytes()),
            Err(Error::UnsupportedVersion(99))
        ));
    }

    #[test]
    fn truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.qds");
        write_dataset(&three_examples(), &path).unwrap();
        let raw = std::fs::read(&path).unwrap();
        for cut in [2, 10, 21, raw.len() - 1] {
            std::fs::write(&path, &raw[..cut]).unwrap();
            assert!(
                matches!(read_dataset(&path), Err(Error::Truncated(_))),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn bad_schedule_and_trailing_bytes() {
        assert!(matches!(patched(16, &[9]), Err(Error::UnknownSchedule(9))));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.qds");
        write_dataset(&three_examples(), &path).unwrap();
        let mut raw = std::fs::read(&path).unwrap();
        raw.push(0);
        std::fs::write(&path, raw).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Corrupt(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_dataset(Path::new("/nonexistent/dir/x.qds")).unwrap_err();
        assert_eq!(err.kind(), "io");
    }
}
