//! Binary checkpoint format.
//!
//! ```text
//! "DISPU001"                 8 magic bytes
//! u32 little-endian          header length in bytes
//! header                     UTF-8 JSON: {"rng_seed", "entries": [{name, dtype, shape}], "meta"}
//! payload                    f32 little-endian values, entries in header order
//! ```
//!
//! Entries are written in sorted name order. `meta` carries the model
//! configuration so a checkpoint is self-describing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::array::Array;
use super::params::ParamStore;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DISPU001";

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    rng_seed: u64,
    entries: Vec<Entry>,
    #[serde(default)]
    meta: serde_json::Value,
}

pub fn encode(params: &ParamStore, meta: &serde_json::Value) -> Result<Vec<u8>> {
    let header = Header {
        rng_seed: params.rng_seed(),
        entries: params
            .iter()
            .map(|(name, a)| Entry {
                name: name.to_string(),
                dtype: "f32".into(),
                shape: a.shape().to_vec(),
            })
            .collect(),
        meta: meta.clone(),
    };
    let header = serde_json::to_vec(&header)?;
    let len = u32::try_from(header.len()).map_err(|_| Error::Checkpoint("header too large".into()))?;
    let mut out = Vec::with_capacity(12 + header.len() + 4 * params.scalar_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&header);
    for (_, a) in params.iter() {
        for &v in a.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(ParamStore, serde_json::Value)> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(bad("missing DISPU001 magic"));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = 12 + len;
    let header_bytes = bytes.get(12..header_end).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(header_bytes)?;

    let mut store = ParamStore::new(header.rng_seed);
    let mut pos = header_end;
    for entry in header.entries {
        if entry.dtype != "f32" {
            return Err(Error::Checkpoint(format!("unsupported dtype `{}`", entry.dtype)));
        }
        let n: usize = entry.shape.iter().product();
        let raw = bytes.get(pos..pos + 4 * n).ok_or_else(|| bad("truncated payload"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        pos += 4 * n;
        store.insert(entry.name, Array::new(entry.shape, data)?)?;
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes after payload"));
    }
    Ok((store, header.meta))
}

pub fn save(path: &Path, params: &ParamStore, meta: &serde_json::Value) -> Result<()> {
    std::fs::write(path, encode(params, meta)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(ParamStore, serde_json::Value)> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Initializer;

    #[test]
    fn layout_starts_with_magic_and_sorted_header() {
        let mut init = Initializer::new(1);
        init.linear("zeta", 2, 3).unwrap();
        init.linear("alpha", 3, 1).unwrap();
        let store = init.finish();
        let bytes = encode(&store, &serde_json::json!({"r": 4})).unwrap();
        assert_eq!(&bytes[..8], b"DISPU001");
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + len]).unwrap();
        let names: Vec<_> = header["entries"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["name"].as_str().unwrap().to_string())
            .collect();
        assert_eq!(names, ["alpha.bias", "alpha.weight", "zeta.bias", "zeta.weight"]);
        assert_eq!(bytes.len(), 12 + len + 4 * store.scalar_count());

        let (back, meta) = decode(&bytes).unwrap();
        assert_eq!(meta["r"], 4);
        for ((n1, a), (n2, b)) in store.iter().zip(back.iter()) {
            assert_eq!(n1, n2);
            assert!(a.max_abs_diff(b) < 1e-6);
        }
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        assert!(decode(b"NOTMAGIC\0\0\0\0").is_err());
        let store = Initializer::new(0).finish();
        let mut bytes = encode(&store, &serde_json::Value::Null).unwrap();
        bytes.push(0);
        assert!(decode(&bytes).is_err());
    }
}
