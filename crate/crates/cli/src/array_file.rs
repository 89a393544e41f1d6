//! Raw little-endian array blobs described by a JSON manifest.
//!
//! `name.json` holds the manifest, `name.bin` the row-major data.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{ArrayD, ArrayViewD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    #[serde(rename = "row-major")]
    RowMajor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ByteOrder {
    #[serde(rename = "little-endian")]
    LittleEndian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub order: Order,
    pub byte_order: ByteOrder,
    /// What the array holds, e.g. `"sample scan"`.
    pub semantic: String,
    pub units: String,
}

impl Manifest {
    pub fn new(dtype: Dtype, shape: &[usize], semantic: &str, units: &str) -> Self {
        Self {
            dtype,
            shape: shape.to_vec(),
            order: Order::RowMajor,
            byte_order: ByteOrder::LittleEndian,
            semantic: semantic.into(),
            units: units.into(),
        }
    }

    pub fn n_elements(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Blob path belonging to a manifest path.
pub fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

/// Writes `data` as `manifest` (`.json`) plus a sibling `.bin`. Values are
/// narrowed to f32 when `dtype` asks for it.
pub fn write_array(path: &Path, data: ArrayViewD<f64>, dtype: Dtype, semantic: &str, units: &str) -> Result<()> {
    let manifest = Manifest::new(dtype, data.shape(), semantic, units);
    let mut bytes = Vec::with_capacity(manifest.n_elements() * dtype.size());
    // Logical (row-major) iteration order regardless of memory layout.
    for &v in data.iter() {
        match dtype {
            Dtype::F64 => bytes.extend_from_slice(&v.to_le_bytes()),
            Dtype::F32 => bytes.extend_from_slice(&(v as f32).to_le_bytes()),
        }
    }
    let blob = blob_path(path);
    fs::write(&blob, bytes).map_err(CliError::io(&blob))?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(path, json + "\n").map_err(CliError::io(path))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: malformed manifest: {e}", path.display())))
}

/// Reads an array file, widening f32 data to f64.
pub fn read_array(path: &Path) -> Result<(Manifest, ArrayD<f64>)> {
    let manifest = read_manifest(path)?;
    let blob = blob_path(path);
    let bytes = fs::read(&blob).map_err(CliError::io(&blob))?;
    let expected = manifest.n_elements() * manifest.dtype.size();
    if bytes.len() != expected {
        return Err(CliError::Validation(format!(
            "{}: blob has {} bytes, manifest shape {:?} needs {expected}",
            blob.display(),
            bytes.len(),
            manifest.shape
        )));
    }
    let values: Vec<f64> = match manifest.dtype {
        Dtype::F64 => bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        Dtype::F32 => bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
    };
    let data = ArrayD::from_shape_vec(IxDyn(&manifest.shape), values).expect("length checked");
    Ok((manifest, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn f64_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        let a = Array3::from_shape_fn((3, 4, 2), |(i, j, k)| (i as f64 + 0.1).powf(j as f64 - 1.7) * (k as f64 - 0.3));
        write_array(&p, a.view().into_dyn(), Dtype::F64, "test", "1").unwrap();
        let (m, b) = read_array(&p).unwrap();
        assert_eq!(m.shape, vec![3, 4, 2]);
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn f32_widens_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        let a = ndarray::arr1(&[0.1f64, -3.25, 1e30]).into_dyn();
        write_array(&p, a.view(), Dtype::F32, "test", "1").unwrap();
        let (_, b) = read_array(&p).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(*y, (*x as f32) as f64);
        }
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        write_array(&p, ndarray::arr1(&[1.0, 2.0]).into_dyn().view(), Dtype::F64, "x", "1").unwrap();
        let blob = blob_path(&p);
        let bytes = fs::read(&blob).unwrap();
        fs::write(&blob, &bytes[..12]).unwrap();
        assert!(matches!(read_array(&p), Err(CliError::Validation(_))));
    }

    #[test]
    fn unknown_manifest_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        write_array(&p, ndarray::arr1(&[1.0]).into_dyn().view(), Dtype::F64, "x", "1").unwrap();
        let text = fs::read_to_string(&p).unwrap().replacen('{', "{\"extra\": 1,", 1);
        fs::write(&p, text).unwrap();
        assert!(matches!(read_array(&p), Err(CliError::Validation(_))));
    }

    #[test]
    fn wrong_byte_order_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        write_array(&p, ndarray::arr1(&[1.0]).into_dyn().view(), Dtype::F64, "x", "1").unwrap();
        let text = fs::read_to_string(&p).unwrap().replace("little-endian", "big-endian");
        fs::write(&p, text).unwrap();
        assert!(read_array(&p).is_err());
    }
}
