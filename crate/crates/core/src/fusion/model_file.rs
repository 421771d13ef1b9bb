//! Versioned binary model files.
//!
//! Layout: magic "SFN1", then the architecture as little-endian u32 fields
//! (k1, hidden channels, k2), then little-endian f64 weights in order:
//! conv1 kernel (ky, kx, c_in, c_out row-major), conv1 bias, conv2 kernel,
//! conv2 bias.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::tensor::ConvKernel;
use super::{Arch, FusionParams};

const MAGIC: &[u8; 4] = b"SFN1";

pub fn save_model<P: AsRef<Path>>(params: &FusionParams, path: P) -> Result<()> {
    let path = path.as_ref();
    let arch = params.arch();
    let mut bytes = Vec::with_capacity(
        16 + 8 * (params.conv1().data().len()
            + params.bias1().len()
            + params.conv2().data().len()
            + params.bias2().len()),
    );
    bytes.extend_from_slice(MAGIC);
    for field in [arch.k1 as u32, arch.hidden as u32, arch.k2 as u32] {
        bytes.extend_from_slice(&field.to_le_bytes());
    }
    for values in [
        params.conv1().data(),
        params.bias1(),
        params.conv2().data(),
        params.bias2(),
    ] {
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

pub fn load_model<P: AsRef<Path>>(path: P) -> Result<FusionParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound { path: path.into() },
        _ => Error::Io {
            path: path.into(),
            source,
        },
    })?;
    let invalid = |reason: &str| Error::InvalidModelFile {
        path: path.into(),
        reason: reason.into(),
    };
    if bytes.len() < 16 {
        return Err(invalid("file shorter than the 16-byte header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(invalid("bad magic bytes (expected \"SFN1\")"));
    }
    let field = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let arch = Arch {
        k1: field(0) as usize,
        hidden: field(1) as usize,
        k2: field(2) as usize,
    };
    arch.validate().map_err(|e| invalid(&e.to_string()))?;

    let n1 = arch.k1 * arch.k1 * 2 * arch.hidden;
    let n2 = arch.k2 * arch.k2 * arch.hidden * 2;
    let total = 16 + 8 * (n1 + arch.hidden + n2 + 2);
    if bytes.len() != total {
        return Err(invalid(&format!(
            "expected {total} bytes for this architecture, found {}",
            bytes.len()
        )));
    }

    let mut offset = 16;
    let mut take = |count: usize| -> Vec<f64> {
        let out = bytes[offset..offset + 8 * count]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        offset += 8 * count;
        out
    };
    let conv1 = take(n1);
    let bias1 = take(arch.hidden);
    let conv2 = take(n2);
    let bias2 = take(2);
    if conv1
        .iter()
        .chain(&bias1)
        .chain(&conv2)
        .chain(&bias2)
        .any(|v| !v.is_finite())
    {
        return Err(invalid("non-finite weight"));
    }
    FusionParams::from_parts(
        arch,
        ConvKernel::from_data(arch.k1, arch.k1, 2, arch.hidden, conv1)?,
        bias1,
        ConvKernel::from_data(arch.k2, arch.k2, arch.hidden, 2, conv2)?,
        bias2,
    )
}
