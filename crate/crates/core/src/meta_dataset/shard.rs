//! `TFSHARD1` container.
//!
//! ```text
//! magic     8 bytes  "TFSHARD1"
//! L         u32 LE   manifest length in bytes
//! manifest  L bytes  UTF-8 JSON
//! payload            f32 LE, row-major, no padding:
//!                      features    n × 24
//!                      predictions n × k × t_out × d
//!                      truths      n × t_out × d
//! ```
//!
//! The manifest carries the schema and a CRC32C of the payload.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{MetaSample, MetaShard, PredictionTensor, Roster, ShardSchema, Split};
use crate::error::{Error, Result};
use crate::meta_features::{MetaFeatureVector, FEATURE_NAMES, N_FEATURES};

pub const SHARD_MAGIC: &[u8; 8] = b"TFSHARD1";
const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 12;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    task_id: String,
    split: Split,
    n_samples: usize,
    k: usize,
    d_meta: usize,
    t_out: usize,
    d: usize,
    roster: Vec<String>,
    feature_order: Vec<String>,
    checksum: String,
}

fn push_f32(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&(v as f32).to_le_bytes());
}

pub fn shard_to_bytes(shard: &MetaShard) -> Result<Vec<u8>> {
    let ShardSchema { roster, t_out, d } = shard.schema();
    let (k, t_out, d) = (roster.len(), *t_out, *d);
    let n = shard.len();

    let mut payload = Vec::with_capacity(4 * n * (N_FEATURES + (k + 1) * t_out * d));
    for s in shard.samples() {
        for &v in s.features().as_slice() {
            push_f32(&mut payload, v);
        }
    }
    for s in shard.samples() {
        for &v in s.predictions().values().iter() {
            push_f32(&mut payload, v);
        }
    }
    for s in shard.samples() {
        for &v in s.truth().iter() {
            push_f32(&mut payload, v);
        }
    }

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        task_id: shard.task_id().to_owned(),
        split: shard.split(),
        n_samples: n,
        k,
        d_meta: N_FEATURES,
        t_out,
        d,
        roster: roster.to_vec(),
        feature_order: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        checksum: format!("{:08x}", crc32c::crc32c(&payload)),
    };
    let manifest = serde_json::to_vec(&manifest)?;
    let manifest_len = u32::try_from(manifest.len())
        .map_err(|_| Error::Format("manifest exceeds 4 GiB".into()))?;

    let mut out = Vec::with_capacity(HEADER_LEN + manifest.len() + payload.len());
    out.extend_from_slice(SHARD_MAGIC);
    out.extend_from_slice(&manifest_len.to_le_bytes());
    out.extend_from_slice(&manifest);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn shard_from_bytes(bytes: &[u8]) -> Result<MetaShard> {
    if bytes.len() < SHARD_MAGIC.len() || &bytes[..8] != SHARD_MAGIC {
        return Err(Error::Format("bad magic, not a TFSHARD1 file".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedFile {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let manifest_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let manifest_end = HEADER_LEN + manifest_len;
    if bytes.len() < manifest_end {
        return Err(Error::TruncatedFile {
            expected: manifest_end,
            actual: bytes.len(),
        });
    }
    let m: Manifest = serde_json::from_slice(&bytes[HEADER_LEN..manifest_end])
        .map_err(|e| Error::Format(format!("manifest: {e}")))?;

    if m.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {}",
            m.format_version
        )));
    }
    if m.d_meta != N_FEATURES || m.feature_order.iter().ne(FEATURE_NAMES.iter()) {
        return Err(Error::Format("feature order does not match this build".into()));
    }
    if m.roster.len() != m.k {
        return Err(Error::Format(format!(
            "manifest declares k = {} but lists {} models",
            m.k,
            m.roster.len()
        )));
    }
    let roster = Roster::new(m.roster.clone())?;

    let per_sample = N_FEATURES + (m.k + 1) * m.t_out * m.d;
    let expected = m
        .n_samples
        .checked_mul(per_sample)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Format("declared payload size overflows".into()))?;
    let payload = &bytes[manifest_end..];
    if payload.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    let actual = format!("{:08x}", crc32c::crc32c(payload));
    if actual != m.checksum {
        return Err(Error::ChecksumMismatch {
            expected: m.checksum,
            actual,
        });
    }

    let mut floats = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
    let mut take = |count: usize| -> Vec<f64> { floats.by_ref().take(count).collect() };

    let n = m.n_samples;
    let features = take(n * N_FEATURES);
    let pred_len = m.k * m.t_out * m.d;
    let predictions = take(n * pred_len);
    let truth_len = m.t_out * m.d;
    let truths = take(n * truth_len);

    let schema = ShardSchema {
        roster: roster.clone(),
        t_out: m.t_out,
        d: m.d,
    };
    let mut shard = MetaShard::new(m.task_id, m.split, schema)?;
    for i in 0..n {
        let f = MetaFeatureVector::from_slice(&features[i * N_FEATURES..(i + 1) * N_FEATURES])?;
        let p = Array3::from_shape_vec(
            (m.k, m.t_out, m.d),
            predictions[i * pred_len..(i + 1) * pred_len].to_vec(),
        )
        .expect("sized by manifest");
        let t = Array2::from_shape_vec((m.t_out, m.d), truths[i * truth_len..(i + 1) * truth_len].to_vec())
            .expect("sized by manifest");
        let sample = PredictionTensor::new(p, roster.clone())
            .and_then(|p| MetaSample::new(f, p, t))
            .map_err(|e| Error::Format(format!("sample {i}: {e}")))?;
        shard.push(sample)?;
    }
    Ok(shard)
}

pub fn write_shard(shard: &MetaShard, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, shard_to_bytes(shard)?)?;
    Ok(())
}

pub fn read_shard(path: impl AsRef<Path>) -> Result<MetaShard> {
    shard_from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta_dataset::tests::{sample, shard};

    #[test]
    fn round_trip_is_identity() {
        let s = MetaShard::from_samples(
            "etth1",
            Split::Test,
            (0..5).map(|i| sample(i as f64 * 0.37, 3, 6, 2)).collect(),
        )
        .unwrap();
        let bytes = shard_to_bytes(&s).unwrap();
        let back = shard_from_bytes(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(shard_to_bytes(&back).unwrap(), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = shard_to_bytes(&shard("a", 2)).unwrap();
        assert_eq!(&bytes[..8], b"TFSHARD1");
        let l = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let manifest: serde_json::Value = serde_json::from_slice(&bytes[12..12 + l]).unwrap();
        assert_eq!(manifest["format_version"], 1);
        assert_eq!(manifest["split"], "meta_train");
        assert_eq!(manifest["d_meta"], 24);
        assert_eq!(manifest["feature_order"][7], "stationarity");
        // 2 samples × (24 + 2·4·1 + 4·1) floats
        assert_eq!(bytes.len() - 12 - l, 4 * 2 * 36);
        let keys: Vec<&str> = manifest.as_object().unwrap().keys().map(String::as_str).collect();
        assert!(keys.contains(&"checksum"));
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = shard_to_bytes(&shard("a", 3)).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(shard_from_bytes(&bad), Err(Error::Format(_))));

        assert!(matches!(
            shard_from_bytes(&bytes[..bytes.len() - 5]),
            Err(Error::TruncatedFile { .. })
        ));
        assert!(matches!(shard_from_bytes(&bytes[..10]), Err(Error::TruncatedFile { .. })));

        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 0x40;
        assert!(matches!(
            shard_from_bytes(&flipped),
            Err(Error::ChecksumMismatch { .. })
        ));

        let mut long = bytes;
        long.push(0);
        assert!(matches!(shard_from_bytes(&long), Err(Error::Format(_))));
    }
}
