//! Binary model file: the text line `mtl-model v1\n`, then little-endian
//! `u32` N, `u32` hidden layer count, `u32` hidden sizes, `f32` feature means,
//! `f32` feature deviations, and every tensor in [`MtlModel::tensors`] order
//! as row-major `f32`.

use std::path::Path;

use super::features::{feature_len, FeatureStats};
use super::network::MtlModel;
use crate::error::{Error, Result};

pub const MODEL_HEADER: &str = "mtl-model v1\n";

pub fn encode_model(model: &MtlModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(MODEL_HEADER.len() + 4 * (model.n_parameters() + 64));
    out.extend_from_slice(MODEL_HEADER.as_bytes());
    out.extend_from_slice(&(model.n_vehicles as u32).to_le_bytes());
    out.extend_from_slice(&(model.hidden_sizes.len() as u32).to_le_bytes());
    for &h in &model.hidden_sizes {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    let stats = model.stats.mean.iter().chain(&model.stats.std);
    for &v in stats.chain(model.tensors().into_iter().flatten()) {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, len: usize) -> Result<&[u8]> {
        let end = self.pos + len;
        if end > self.bytes.len() {
            return Err(Error::Shape(format!(
                "model file truncated at byte {} (need {len} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32s(&mut self, out: &mut [f64]) -> Result<()> {
        let b = self.take(4 * out.len())?;
        for (o, c) in out.iter_mut().zip(b.chunks_exact(4)) {
            *o = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
        }
        Ok(())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<MtlModel> {
    if !bytes.starts_with(MODEL_HEADER.as_bytes()) {
        return Err(Error::Shape("missing `mtl-model v1` header".into()));
    }
    let mut r = Reader {
        bytes,
        pos: MODEL_HEADER.len(),
    };
    let n = r.u32()?;
    let depth = r.u32()?;
    if depth > 64 {
        return Err(Error::Shape(format!(
            "implausible hidden layer count {depth}"
        )));
    }
    let hidden = (0..depth).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let f = feature_len(n);
    let mut stats = FeatureStats {
        mean: vec![0.0; f],
        std: vec![0.0; f],
    };
    r.f32s(&mut stats.mean)?;
    r.f32s(&mut stats.std)?;
    if stats.std.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Shape("feature deviations must be positive".into()));
    }
    let mut model = MtlModel::zeros(n, &hidden, stats)?;
    for t in model.tensors_mut() {
        r.f32s(t)?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Shape(format!(
            "{} trailing bytes after model tensors",
            bytes.len() - r.pos
        )));
    }
    Ok(model)
}

pub fn save_model(model: &MtlModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<MtlModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
