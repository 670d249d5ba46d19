//! Checkpoint serialization.
//!
//! Fixed little-endian binary layout:
//!
//! ```text
//! magic      4 bytes  "DYGP"
//! version    u32      currently 1
//! n_params   u32
//! per param (insertion order):
//!   name_len u32, name bytes (utf-8), rows u64, cols u64,
//!   values   rows*cols f64 (row-major)
//! adam_step  u64
//! adam_lr, adam_beta1, adam_beta2, adam_eps   f64 each
//! per param (same order):
//!   m        rows*cols f64, then v rows*cols f64
//! ```
//!
//! Loading reproduces values and optimizer state exactly (f64 bit patterns
//! pass through untouched), so save -> load -> save emits identical bytes.
//! Frozen-row annotations are structural, not learned; callers re-apply them
//! when attaching a model to a loaded store.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::adam::AdamState;
use super::matrix::DenseMatrix;
use super::params::ParameterStore;
use crate::error::{DygppError, Result};

const MAGIC: [u8; 4] = *b"DYGP";
const VERSION: u32 = 1;

// --- little-endian primitives ---------------------------------------------

fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64_slice<W: Write>(w: &mut W, vs: &[f64]) -> std::io::Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_or_format<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            DygppError::CheckpointFormat("truncated checkpoint".into())
        } else {
            DygppError::io("<checkpoint>", e)
        }
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or_format(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact_or_format(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact_or_format(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64_vec<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(read_f64(r)?);
    }
    Ok(out)
}

// --- public API ------------------------------------------------------------

/// Serialize parameters and optimizer state to a writer.
pub fn write_checkpoint<W: Write>(
    w: &mut W,
    store: &ParameterStore,
    adam: &AdamState,
) -> Result<()> {
    let io_err = |e| DygppError::io("<checkpoint>", e);
    w.write_all(&MAGIC).map_err(io_err)?;
    write_u32(w, VERSION).map_err(io_err)?;
    write_u32(w, store.len() as u32).map_err(io_err)?;
    for (_, entry) in store.iter() {
        write_u32(w, entry.name.len() as u32).map_err(io_err)?;
        w.write_all(entry.name.as_bytes()).map_err(io_err)?;
        write_u64(w, entry.value.rows() as u64).map_err(io_err)?;
        write_u64(w, entry.value.cols() as u64).map_err(io_err)?;
        write_f64_slice(w, entry.value.as_slice()).map_err(io_err)?;
    }
    write_u64(w, adam.step).map_err(io_err)?;
    write_f64_slice(
        w,
        &[adam.learning_rate, adam.beta1, adam.beta2, adam.epsilon],
    )
    .map_err(io_err)?;
    for (_, entry) in store.iter() {
        write_f64_slice(w, entry.adam_m.as_slice()).map_err(io_err)?;
        write_f64_slice(w, entry.adam_v.as_slice()).map_err(io_err)?;
    }
    Ok(())
}

/// Deserialize a checkpoint produced by [`write_checkpoint`].
pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<(ParameterStore, AdamState)> {
    let mut magic = [0u8; 4];
    read_exact_or_format(r, &mut magic)?;
    if magic != MAGIC {
        return Err(DygppError::CheckpointFormat(format!(
            "bad magic {:02x?}, expected \"DYGP\" version {}",
            magic, VERSION
        )));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(DygppError::CheckpointFormat(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let n_params = read_u32(r)? as usize;

    let mut store = ParameterStore::new();
    let mut shapes = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let name_len = read_u32(r)? as usize;
        if name_len > 1 << 16 {
            return Err(DygppError::CheckpointFormat(format!(
                "implausible name length {name_len}"
            )));
        }
        let mut name_bytes = vec![0u8; name_len];
        read_exact_or_format(r, &mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| DygppError::CheckpointFormat("non-utf8 parameter name".into()))?;
        let rows = read_u64(r)? as usize;
        let cols = read_u64(r)? as usize;
        if rows.checked_mul(cols).is_none() || rows * cols > (1 << 31) {
            return Err(DygppError::CheckpointFormat(format!(
                "implausible shape {rows}x{cols} for `{name}`"
            )));
        }
        let values = read_f64_vec(r, rows * cols)?;
        let id = store.insert(&name, DenseMatrix::from_vec(rows, cols, values));
        shapes.push((id, rows, cols));
    }

    let step = read_u64(r)?;
    let learning_rate = read_f64(r)?;
    let beta1 = read_f64(r)?;
    let beta2 = read_f64(r)?;
    let epsilon = read_f64(r)?;
    let adam = AdamState {
        learning_rate,
        beta1,
        beta2,
        epsilon,
        step,
    };

    for &(id, rows, cols) in &shapes {
        let m = read_f64_vec(r, rows * cols)?;
        let v = read_f64_vec(r, rows * cols)?;
        let entry = store.entry_mut(id);
        entry.adam_m = DenseMatrix::from_vec(rows, cols, m);
        entry.adam_v = DenseMatrix::from_vec(rows, cols, v);
    }

    Ok((store, adam))
}

/// Write a checkpoint file.
pub fn save_checkpoint(path: &Path, store: &ParameterStore, adam: &AdamState) -> Result<()> {
    let file = File::create(path).map_err(|e| DygppError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(&mut w, store, adam)?;
    w.flush()
        .map_err(|e| DygppError::io(path.display().to_string(), e))
}

/// Read a checkpoint file.
pub fn load_checkpoint(path: &Path) -> Result<(ParameterStore, AdamState)> {
    let file = File::open(path).map_err(|e| DygppError::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    read_checkpoint(&mut r)
}
