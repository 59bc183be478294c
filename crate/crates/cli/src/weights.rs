//! Binary weight files: magic "CCNN", format version, then one named
//! tensor per kernel and bias in layer order. All integers little-endian,
//! payloads 32-bit floats.
//!
//! Layout per tensor: name length (u16) + UTF-8 name, rank (u8), dims
//! (u32 each), then the row-major f32 payload.

use std::fmt;
use std::fs;
use std::path::Path;

use dehaze_core::network::{NetworkConfig, WeightStore};
use dehaze_core::ops::ConvParams;
use dehaze_core::Tensor;

pub const MAGIC: &[u8; 4] = b"CCNN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightsError {
    BadMagic,
    BadVersion { found: u32 },
    Truncated { at: &'static str },
    LayerMismatch { layer: String, detail: String },
    TrailingData { extra: usize },
}

impl fmt::Display for WeightsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightsError::BadMagic => write!(f, "not a CCNN weight file (bad magic)"),
            WeightsError::BadVersion { found } => {
                write!(f, "unsupported weight format version {found} (expected {VERSION})")
            }
            WeightsError::Truncated { at } => write!(f, "weight file truncated while reading {at}"),
            WeightsError::LayerMismatch { layer, detail } => {
                write!(f, "layer {layer}: {detail}")
            }
            WeightsError::TrailingData { extra } => {
                write!(f, "weight file has {extra} unexpected trailing bytes")
            }
        }
    }
}

impl std::error::Error for WeightsError {}

/// Serialize a weight store. Entries follow layer order: for each layer,
/// "{name}.kernel" (rank 4) then "{name}.bias" (rank 1).
pub fn encode_weights(store: &WeightStore<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(2 * store.len() as u32).to_le_bytes());
    for (name, params) in store.iter() {
        let (o, i, fh, fw) = params.kernel().shape();
        write_tensor(
            &mut out,
            &format!("{name}.kernel"),
            &[o as u32, i as u32, fh as u32, fw as u32],
            params.kernel().data(),
        );
        write_tensor(&mut out, &format!("{name}.bias"), &[o as u32], params.bias());
    }
    out
}

fn write_tensor(out: &mut Vec<u8>, name: &str, dims: &[u32], data: &[f32]) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, at: &'static str) -> Result<&'a [u8], WeightsError> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or(WeightsError::Truncated { at })?;
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self, at: &'static str) -> Result<u16, WeightsError> {
        let b = self.take(2, at)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, at: &'static str) -> Result<u32, WeightsError> {
        let b = self.take(4, at)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parse and validate a weight file against a configuration. Any layer
/// whose name or dims disagree with the config fails with the offending
/// layer named; truncation never yields a partial store.
pub fn decode_weights(
    bytes: &[u8],
    config: &NetworkConfig,
) -> Result<WeightStore<f32>, WeightsError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(WeightsError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(WeightsError::BadVersion { found: version });
    }
    let count = r.u32("tensor count")? as usize;
    let specs = config.layer_specs();
    if count != 2 * specs.len() {
        return Err(WeightsError::LayerMismatch {
            layer: "<store>".into(),
            detail: format!("config expects {} tensors, file has {count}", 2 * specs.len()),
        });
    }
    let f = config.kernel_size as u32;
    let mut layers = Vec::with_capacity(specs.len());
    for spec in &specs {
        let kernel_dims = [spec.out_channels as u32, spec.in_channels as u32, f, f];
        let kernel = read_tensor(&mut r, &format!("{}.kernel", spec.name), &kernel_dims)?;
        let bias = read_tensor(&mut r, &format!("{}.bias", spec.name), &[spec.out_channels as u32])?;
        let kernel = Tensor::from_vec(
            spec.out_channels,
            spec.in_channels,
            f as usize,
            f as usize,
            kernel,
        )
        .map_err(|e| WeightsError::LayerMismatch {
            layer: spec.name.clone(),
            detail: e.to_string(),
        })?;
        let params = ConvParams::new(kernel, bias).map_err(|e| WeightsError::LayerMismatch {
            layer: spec.name.clone(),
            detail: e.to_string(),
        })?;
        layers.push((spec.name.clone(), params));
    }
    if r.pos != bytes.len() {
        return Err(WeightsError::TrailingData {
            extra: bytes.len() - r.pos,
        });
    }
    Ok(WeightStore::from_layers(layers))
}

fn read_tensor(
    r: &mut Reader<'_>,
    expected_name: &str,
    expected_dims: &[u32],
) -> Result<Vec<f32>, WeightsError> {
    let name_len = r.u16("tensor name length")? as usize;
    let name_bytes = r.take(name_len, "tensor name")?;
    let name = std::str::from_utf8(name_bytes).map_err(|_| WeightsError::LayerMismatch {
        layer: expected_name.into(),
        detail: "tensor name is not UTF-8".into(),
    })?;
    if name != expected_name {
        return Err(WeightsError::LayerMismatch {
            layer: expected_name.into(),
            detail: format!("found tensor {name}"),
        });
    }
    let rank = r.take(1, "tensor rank")?[0] as usize;
    if rank != expected_dims.len() {
        return Err(WeightsError::LayerMismatch {
            layer: expected_name.into(),
            detail: format!("rank {rank}, expected {}", expected_dims.len()),
        });
    }
    let mut dims = [0u32; 8];
    for d in dims.iter_mut().take(rank) {
        *d = r.u32("tensor dims")?;
    }
    if &dims[..rank] != expected_dims {
        return Err(WeightsError::LayerMismatch {
            layer: expected_name.into(),
            detail: format!("dims {:?} do not match config {:?}", &dims[..rank], expected_dims),
        });
    }
    let len: usize = expected_dims.iter().map(|&d| d as usize).product();
    let payload = r.take(4 * len, "tensor payload")?;
    Ok(payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

pub fn save_weights(store: &WeightStore<f32>, path: &Path) -> anyhow::Result<()> {
    fs::write(path, encode_weights(store))
        .map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))
}

pub fn load_weights(path: &Path, config: &NetworkConfig) -> anyhow::Result<WeightStore<f32>> {
    let bytes = fs::read(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    Ok(decode_weights(&bytes, config)?)
}
