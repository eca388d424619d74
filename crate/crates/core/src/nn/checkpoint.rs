//! Binary model files: magic, version, a JSON manifest, then raw tensors.
//!
//! Layout: `QSRLCKPT`, `u32` format version, `u64` manifest length, the
//! manifest as UTF-8 JSON, then each tensor listed in the manifest as
//! little-endian `f32` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NnError, ParamStore, Tensor, Vocab};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"QSRLCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub format_version: u32,
    /// Model family, e.g. `spanBio`.
    pub kind: String,
    pub hyperparameters: serde_json::Value,
    pub vocab: Vocab,
    pub tensors: Vec<TensorEntry>,
}

pub fn write_checkpoint(
    mut writer: impl Write,
    kind: &str,
    hyperparameters: serde_json::Value,
    vocab: &Vocab,
    store: &ParamStore<f32>,
) -> Result<(), NnError> {
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        hyperparameters,
        vocab: vocab.clone(),
        tensors: store
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.to_string(),
                shape: t.shape.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&manifest)?;
    writer.write_all(CHECKPOINT_MAGIC)?;
    writer.write_all(&FORMAT_VERSION.to_le_bytes())?;
    writer.write_all(&(json.len() as u64).to_le_bytes())?;
    writer.write_all(&json)?;
    for (_, t) in store.iter() {
        let mut bytes = Vec::with_capacity(t.len() * 4);
        for x in &t.data {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        writer.write_all(&bytes)?;
    }
    writer.flush()?;
    Ok(())
}

fn bad(message: impl Into<String>) -> NnError {
    NnError::Checkpoint(message.into())
}

fn read_exact(reader: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), NnError> {
    reader.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => bad(format!("truncated {what}")),
        _ => NnError::Io(e),
    })
}

pub fn read_checkpoint(mut reader: impl Read) -> Result<(Manifest, ParamStore<f32>), NnError> {
    let mut magic = [0u8; 8];
    read_exact(&mut reader, &mut magic, "header")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut word = [0u8; 4];
    read_exact(&mut reader, &mut word, "header")?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let mut long = [0u8; 8];
    read_exact(&mut reader, &mut long, "header")?;
    let len = usize::try_from(u64::from_le_bytes(long)).map_err(|_| bad("manifest too large"))?;
    let mut json = vec![0u8; len];
    read_exact(&mut reader, &mut json, "manifest")?;
    let manifest: Manifest = serde_json::from_slice(&json)?;
    if manifest.format_version != version {
        return Err(bad("manifest version disagrees with header"));
    }
    let mut store = ParamStore::new();
    for entry in &manifest.tensors {
        let count: usize = entry.shape.iter().product();
        let mut bytes = vec![0u8; count * 4];
        read_exact(&mut reader, &mut bytes, &entry.name)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        store.add(entry.name.clone(), Tensor::from_vec(&entry.shape, data)?)?;
    }
    let mut rest = [0u8; 1];
    if reader.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes"));
    }
    Ok((manifest, store))
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    kind: &str,
    hyperparameters: serde_json::Value,
    vocab: &Vocab,
    store: &ParamStore<f32>,
) -> Result<(), NnError> {
    write_checkpoint(
        BufWriter::new(File::create(path)?),
        kind,
        hyperparameters,
        vocab,
        store,
    )
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Manifest, ParamStore<f32>), NnError> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
