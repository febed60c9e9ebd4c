//! Binary checkpoint files.
//!
//! Layout: 8-byte magic, `u32` version, `u64` header length, `u64` FNV-1a of
//! the header, a JSON header, then every array as little-endian `f32`.
//! All integers are little-endian.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::nn::{Fnv, ParamStore};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"STYLSHFT";
pub const VERSION: u32 = 1;
const PREFIX_LEN: usize = 8 + 4 + 8 + 8;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    /// Element offset into the data section.
    offset: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    config: Value,
    arrays: Vec<ArrayEntry>,
    data_checksum: u64,
}

/// In-memory checkpoint: a kind tag, a config snapshot and named arrays.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub kind: String,
    pub config: Value,
    arrays: Vec<(String, Tensor)>,
    path: PathBuf,
}

impl Checkpoint {
    pub fn new(kind: &str, config: &impl Serialize) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Checkpoint {
            kind: kind.to_string(),
            config,
            arrays: Vec::new(),
            path: PathBuf::new(),
        })
    }

    /// Adds every parameter of `store` under `prefix`.
    pub fn add_store(&mut self, prefix: &str, store: &ParamStore) {
        for p in store.iter() {
            self.arrays.push((format!("{prefix}{}", p.name), p.value.clone()));
        }
    }

    pub fn array_names(&self) -> impl Iterator<Item = &str> {
        self.arrays.iter().map(|(n, _)| n.as_str())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut data = Vec::new();
        let mut entries = Vec::with_capacity(self.arrays.len());
        let mut offset = 0;
        for (name, t) in &self.arrays {
            entries.push(ArrayEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
            });
            offset += t.len();
            for &v in t.data() {
                data.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let header = Header {
            kind: self.kind.clone(),
            config: self.config.clone(),
            arrays: entries,
            data_checksum: fnv(&data),
        };
        let header = serde_json::to_vec(&header).map_err(|e| Error::Config(e.to_string()))?;
        let mut bytes = Vec::with_capacity(PREFIX_LEN + header.len() + data.len());
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&fnv(&header).to_le_bytes());
        bytes.extend_from_slice(&header);
        bytes.extend_from_slice(&data);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let corrupt = |reason: String| Error::CorruptCheckpoint {
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < PREFIX_LEN || &bytes[..8] != MAGIC {
            return Err(corrupt("missing magic bytes".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: VERSION,
            });
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let header_sum = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let data_start = PREFIX_LEN
            .checked_add(header_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| corrupt("header length exceeds file size".into()))?;
        let header_bytes = &bytes[PREFIX_LEN..data_start];
        if fnv(header_bytes) != header_sum {
            return Err(corrupt("header checksum mismatch".into()));
        }
        let header: Header =
            serde_json::from_slice(header_bytes).map_err(|e| corrupt(format!("unreadable header: {e}")))?;
        let data = &bytes[data_start..];
        let mut arrays = Vec::with_capacity(header.arrays.len());
        let mut expected_offset = 0;
        for entry in header.arrays {
            let n: usize = entry.shape.iter().product();
            if entry.offset != expected_offset {
                return Err(corrupt(format!("array `{}` has offset {}", entry.name, entry.offset)));
            }
            let (start, end) = (entry.offset * 4, (entry.offset + n) * 4);
            if end > data.len() {
                return Err(corrupt(format!("array `{}` is truncated", entry.name)));
            }
            let values = data[start..end]
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                .collect();
            arrays.push((entry.name, Tensor::new(entry.shape, values)?));
            expected_offset += n;
        }
        if data.len() != expected_offset * 4 {
            return Err(corrupt(format!(
                "data section is {} bytes, header describes {}",
                data.len(),
                expected_offset * 4
            )));
        }
        if fnv(data) != header.data_checksum {
            return Err(corrupt("data checksum mismatch".into()));
        }
        Ok(Checkpoint {
            kind: header.kind,
            config: header.config,
            arrays,
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn expect_kind(&self, kinds: &[&str]) -> Result<()> {
        if kinds.contains(&self.kind.as_str()) {
            Ok(())
        } else {
            Err(Error::CorruptCheckpoint {
                path: self.path.clone(),
                reason: format!("holds a `{}` model, expected one of {kinds:?}", self.kind),
            })
        }
    }

    /// Deserializes `config[key]`, or the whole config when `key` is empty.
    pub fn config_as<T: DeserializeOwned>(&self, key: &str) -> Result<T> {
        let v = if key.is_empty() { Some(&self.config) } else { self.config.get(key) };
        v.cloned()
            .ok_or_else(|| format!("config has no `{key}` entry"))
            .and_then(|v| serde_json::from_value(v).map_err(|e| e.to_string()))
            .map_err(|reason| Error::CorruptCheckpoint {
                path: self.path.clone(),
                reason,
            })
    }

    /// Overwrites every parameter of `store` with the array named
    /// `prefix + name`. Shapes must match exactly.
    pub fn fill_store(&self, prefix: &str, store: &mut ParamStore) -> Result<()> {
        for p in store.iter_mut() {
            let name = format!("{prefix}{}", p.name);
            let (_, t) = self
                .arrays
                .iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| Error::CorruptCheckpoint {
                    path: self.path.clone(),
                    reason: format!("array `{name}` is missing"),
                })?;
            if t.shape() != p.value.shape() {
                return Err(Error::ArrayShape {
                    name,
                    found: t.shape().to_vec(),
                    expected: p.value.shape().to_vec(),
                });
            }
            p.value = t.clone();
        }
        Ok(())
    }
}

fn fnv(bytes: &[u8]) -> u64 {
    let mut h = Fnv::new();
    h.write(bytes);
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (ParamStore, Checkpoint) {
        let mut store = ParamStore::new();
        store.add("a", Tensor::new(vec![2, 3], vec![0.5, -1.0, 2.25, 3.0, 0.0, -0.125]).unwrap());
        store.add("b", Tensor::vector(vec![7.0]));
        let mut ck = Checkpoint::new("test", &serde_json::json!({"hidden": 3})).unwrap();
        ck.add_store("m.", &store);
        (store, ck)
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ckpt");
        let (store, ck) = sample();
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.kind, "test");
        assert_eq!(back.config_as::<usize>("hidden").unwrap(), 3);
        let mut fresh = store.clone();
        fresh.iter_mut().for_each(|p| p.value = Tensor::zeros(p.value.shape()));
        back.fill_store("m.", &mut fresh).unwrap();
        assert_eq!(fresh.checksum(), store.checksum());
    }

    #[test]
    fn damage_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ckpt");
        let (_, ck) = sample();
        ck.save(&path).unwrap();
        let good = fs::read(&path).unwrap();

        let mut flipped = good.clone();
        flipped[PREFIX_LEN + 3] ^= 0x20;
        fs::write(&path, &flipped).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::CorruptCheckpoint { .. })));

        let mut version = good.clone();
        version[8] = 9;
        fs::write(&path, &version).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::CheckpointVersion { found: 9, .. })));

        fs::write(&path, &good[..good.len() - 4]).unwrap();
        let err = Checkpoint::load(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");

        let mut data = good.clone();
        let last = data.len() - 1;
        data[last] ^= 1;
        fs::write(&path, &data).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::CorruptCheckpoint { .. })));
    }

    #[test]
    fn shape_mismatch_names_the_array() {
        let (_, ck) = sample();
        let mut other = ParamStore::new();
        other.add("a", Tensor::zeros(&[3, 3]));
        other.add("b", Tensor::zeros(&[1]));
        match ck.fill_store("m.", &mut other) {
            Err(Error::ArrayShape { name, .. }) => assert_eq!(name, "m.a"),
            r => panic!("unexpected {r:?}"),
        }
    }
}
