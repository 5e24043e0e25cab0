//! Binary distance-matrix cache with a JSON sidecar key.
//!
//! Layout (little endian): `"TMDC"`, `u32` version, `u64` n, `u32` depth,
//! `u32` length + metric tag, `u32` length + weight preset, then the
//! `n(n-1)/2` strict-upper-triangle values as `f64`, row by row.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Dataset;
use crate::io::to_jsonl_string;
use crate::tmd::DistanceMatrix;

pub const MAGIC: &[u8; 4] = b"TMDC";
pub const VERSION: u32 = 1;

pub fn encode(m: &DistanceMatrix) -> Vec<u8> {
    let mut out =
        Vec::with_capacity(32 + m.metric.len() + m.weight_preset.len() + 8 * m.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.size() as u64).to_le_bytes());
    out.extend_from_slice(&m.depth.to_le_bytes());
    for s in [&m.metric, &m.weight_preset] {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    }
    for v in m.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Cache(format!("truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Cache(format!("{what} is not UTF-8")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<DistanceMatrix> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Cache("bad magic bytes".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Cache(format!("unsupported version {version}")));
    }
    let n = usize::try_from(r.u64("n")?).map_err(|_| Error::Cache("n too large".into()))?;
    let depth = r.u32("depth")?;
    let metric = r.string("metric tag")?;
    let preset = r.string("weight preset")?;
    let count = n
        .checked_sub(1)
        .map_or(Some(0), |m| n.checked_mul(m).map(|x| x / 2))
        .ok_or_else(|| Error::Cache("n too large".into()))?;
    let byte_len = count
        .checked_mul(8)
        .ok_or_else(|| Error::Cache("n too large".into()))?;
    if bytes.len() - r.pos != byte_len {
        return Err(Error::Cache(format!(
            "expected {byte_len} value bytes, found {}",
            bytes.len() - r.pos
        )));
    }
    let values = r
        .take(byte_len, "values")?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DistanceMatrix::new(n, metric, depth, preset, values).map_err(|e| Error::Cache(e.to_string()))
}

/// What a cache file was computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheKey {
    pub metric: String,
    pub depth: u32,
    pub preset: String,
    pub norm: String,
    pub dataset_sha256: String,
}

/// SHA-256 of the dataset's canonical JSONL form.
pub fn dataset_hash(ds: &Dataset) -> String {
    hex::encode(Sha256::digest(to_jsonl_string(ds).as_bytes()))
}

/// Hex SHA-256 of arbitrary bytes.
pub fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".key");
    PathBuf::from(s)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Write the matrix and its key, each via a temporary file and a rename.
pub fn write_cache(path: &Path, m: &DistanceMatrix, key: &CacheKey) -> Result<()> {
    let sidecar = serde_json::to_vec_pretty(key).map_err(|e| Error::Cache(e.to_string()))?;
    write_atomic(&sidecar_path(path), &sidecar)?;
    write_atomic(path, &encode(m))
}

/// Read a cache, checking it against `key`. `Ok(None)` when no cache exists.
pub fn read_cache(path: &Path, key: &CacheKey) -> Result<Option<DistanceMatrix>> {
    if !path.exists() {
        return Ok(None);
    }
    let m = decode(&fs::read(path)?)?;
    let side = sidecar_path(path);
    let stored: CacheKey = match fs::read(&side) {
        Ok(b) => serde_json::from_slice(&b)
            .map_err(|e| Error::Cache(format!("{}: {e}", side.display())))?,
        Err(_) => return Err(Error::Cache(format!("missing key file {}", side.display()))),
    };
    if stored != *key {
        return Err(Error::Cache(format!(
            "cache {} was built for {stored:?}, requested {key:?}",
            path.display()
        )));
    }
    if m.metric != key.metric || m.depth != key.depth || m.weight_preset != key.preset {
        return Err(Error::Cache(format!(
            "cache header ({}, depth {}, {}) disagrees with its key",
            m.metric, m.depth, m.weight_preset
        )));
    }
    Ok(Some(m))
}

/// Load a matching cache or compute and store the matrix. The flag is true
/// when `compute` ran.
pub fn load_or_compute(
    path: &Path,
    key: &CacheKey,
    expected_n: usize,
    compute: impl FnOnce() -> Result<DistanceMatrix>,
) -> Result<(DistanceMatrix, bool)> {
    if let Some(m) = read_cache(path, key)? {
        if m.size() != expected_n {
            return Err(Error::Cache(format!(
                "cache holds {} graphs, dataset has {expected_n}",
                m.size()
            )));
        }
        return Ok((m, false));
    }
    let m = compute()?;
    write_cache(path, &m, key)?;
    Ok((m, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DistanceMatrix {
        DistanceMatrix::new(3, "tmd-l2", 3, "const:1", vec![0.1, 1e-300, 7.25]).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = sample();
        let bytes = encode(&m);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode(&back), bytes);
        let empty = DistanceMatrix::new(0, "wl", 2, "none", vec![]).unwrap();
        assert_eq!(decode(&encode(&empty)).unwrap(), empty);
    }

    #[test]
    fn layout_matches_contract() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[..4], b"TMDC");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 6);
        assert_eq!(&bytes[24..30], b"tmd-l2");
        assert_eq!(bytes.len(), 30 + 4 + 7 + 24);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let bytes = encode(&sample());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(&[]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(decode(&bad).is_err());
        let mut huge = bytes.clone();
        huge[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode(&huge), Err(Error::Cache(_))));
        let mut neg = bytes;
        let at = neg.len() - 8;
        neg[at..].copy_from_slice(&(-1.0f64).to_le_bytes());
        assert!(decode(&neg).is_err());
    }

    fn key(depth: u32) -> CacheKey {
        CacheKey {
            metric: "tmd-l2".into(),
            depth,
            preset: "const:1".into(),
            norm: "l2".into(),
            dataset_sha256: "abc".into(),
        }
    }

    #[test]
    fn cache_hits_skip_computation_and_mismatches_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.tmdc");
        let (m, fresh) = load_or_compute(&path, &key(3), 3, || Ok(sample())).unwrap();
        assert!(fresh);
        let (again, fresh) =
            load_or_compute(&path, &key(3), 3, || panic!("must not recompute")).unwrap();
        assert!(!fresh);
        assert_eq!(again, m);
        assert!(matches!(
            load_or_compute(&path, &key(2), 3, || Ok(sample())),
            Err(Error::Cache(_))
        ));
        assert!(matches!(
            load_or_compute(&path, &key(3), 4, || Ok(sample())),
            Err(Error::Cache(_))
        ));
        fs::remove_file(sidecar_path(&path)).unwrap();
        assert!(matches!(read_cache(&path, &key(3)), Err(Error::Cache(_))));
    }
}
