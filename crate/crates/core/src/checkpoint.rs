//! Versioned binary checkpoint container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "DSCKPT\0\0" | version u32 | spec_hash u64 | scale f64
//! tile_px u32 | crop_px u32 | flags u32 (bit0 generator BN, bit1 discriminator BN) | seed u64
//! phase u32 | gen_steps u64 | disc_steps u64 | iterations u64
//! tensor_count u32, then per tensor:
//!   name_len u32 | name utf-8 | kind u8 (0 param, 1 buffer) | ndim u32 | dims u32* | data f32*
//! ```

use std::io::Write;
use std::path::Path;

use deepstreet_tensor::Tensor;

use crate::error::{Error, Result};
use crate::network::{Model, NetworkConfig};

pub const MAGIC: &[u8; 8] = b"DSCKPT\0\0";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Last phase that ran (0 before training).
    pub phase: u32,
    pub gen_steps: u64,
    pub disc_steps: u64,
    pub iterations: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub spec_hash: u64,
    pub network: NetworkConfig,
    pub counters: Counters,
}

pub fn encode(model: &Model, counters: Counters) -> Vec<u8> {
    let c = &model.config;
    let mut out = Vec::with_capacity(64 + 4 * (model.params.numel("") + 1024));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&model.spec_hash().to_le_bytes());
    out.extend_from_slice(&c.scale.to_le_bytes());
    out.extend_from_slice(&(c.tile_px as u32).to_le_bytes());
    out.extend_from_slice(&(c.crop_px as u32).to_le_bytes());
    let flags = u32::from(c.generator_batch_norm) | (u32::from(c.discriminator_batch_norm) << 1);
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&c.seed.to_le_bytes());
    out.extend_from_slice(&counters.phase.to_le_bytes());
    for v in [counters.gen_steps, counters.disc_steps, counters.iterations] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let p = &model.params;
    let entries: Vec<(u8, &String, &Tensor)> = p
        .tensors
        .iter()
        .map(|(k, t)| (0u8, k, t))
        .chain(p.buffers.iter().map(|(k, t)| (1u8, k, t)))
        .collect();
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (kind, name, t) in entries {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(kind);
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn read_header(r: &mut Reader) -> Result<CheckpointHeader> {
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let spec_hash = r.u64()?;
    let scale = f64::from_bits(r.u64()?);
    let tile_px = r.u32()? as usize;
    let crop_px = r.u32()? as usize;
    let flags = r.u32()?;
    let seed = r.u64()?;
    let counters = Counters { phase: r.u32()?, gen_steps: r.u64()?, disc_steps: r.u64()?, iterations: r.u64()? };
    let network = NetworkConfig {
        scale,
        tile_px,
        crop_px,
        generator_batch_norm: flags & 1 != 0,
        discriminator_batch_norm: flags & 2 != 0,
        seed,
    };
    Ok(CheckpointHeader { version, spec_hash, network, counters })
}

pub fn read_header_bytes(bytes: &[u8]) -> Result<CheckpointHeader> {
    read_header(&mut Reader { bytes, pos: 0 })
}

/// Rebuilds the model described by the header and fills in every tensor.
pub fn decode(bytes: &[u8]) -> Result<(Model, Counters)> {
    let mut r = Reader { bytes, pos: 0 };
    let header = read_header(&mut r)?;
    let mut model = Model::build(header.network)?;
    if model.spec_hash() != header.spec_hash {
        return Err(Error::CheckpointMismatch(format!(
            "stored spec hash {:016x}, rebuilt network {:016x}",
            header.spec_hash,
            model.spec_hash()
        )));
    }
    let count = r.u32()? as usize;
    let expected = model.params.tensors.len() + model.params.buffers.len();
    if count != expected {
        return Err(Error::CheckpointMismatch(format!("{count} tensors stored, network has {expected}")));
    }
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not utf-8".into()))?
            .to_string();
        let kind = r.u8()?;
        let ndim = r.u32()? as usize;
        let dims: Vec<usize> = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let slot = match kind {
            0 => model.params.tensors.get_mut(&name),
            1 => model.params.buffers.get_mut(&name),
            k => return Err(Error::Checkpoint(format!("tensor kind {k} for {name}"))),
        };
        let slot = slot.ok_or_else(|| Error::CheckpointMismatch(format!("unknown tensor {name}")))?;
        if slot.shape() != dims.as_slice() {
            return Err(Error::CheckpointMismatch(format!("{name}: stored {dims:?}, expected {:?}", slot.shape())));
        }
        for v in slot.data_mut() {
            *v = r.f32()?;
        }
        if !slot.all_finite() {
            return Err(Error::Checkpoint(format!("{name} holds non-finite values")));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((model, header.counters))
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn save(path: &Path, model: &Model, counters: Counters) -> Result<()> {
    let bytes = encode(model, counters);
    let tmp = path.with_extension("tmp");
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(Model, Counters)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Loads a checkpoint and checks it was produced by the architecture in `expected`.
pub fn load_matching(path: &Path, expected: &NetworkConfig) -> Result<(Model, Counters)> {
    let (model, counters) = load(path)?;
    let built = Model::build(NetworkConfig { seed: model.config.seed, ..*expected })?;
    if built.spec_hash() != model.spec_hash() {
        return Err(Error::CheckpointMismatch(format!(
            "{} was trained for a different network ({:016x} vs {:016x})",
            path.display(),
            model.spec_hash(),
            built.spec_hash()
        )));
    }
    Ok((model, counters))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(bn: bool) -> Model {
        Model::build(NetworkConfig {
            scale: 0.125,
            tile_px: 64,
            crop_px: 32,
            generator_batch_norm: bn,
            discriminator_batch_norm: false,
            seed: 5,
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let mut m = model(true);
        m.params.buffers.values_mut().for_each(|t| t.data_mut().fill(0.25));
        let counters = Counters { phase: 2, gen_steps: 10, disc_steps: 3, iterations: 13 };
        let (back, c) = decode(&encode(&m, counters)).unwrap();
        assert_eq!(back, m);
        assert_eq!(c, counters);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode(&model(true), Counters::default());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = bytes.clone();
        bad[12] ^= 1;
        assert!(matches!(decode(&bad), Err(Error::CheckpointMismatch(_))));
    }

    #[test]
    fn atomic_save_and_matching_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.ckpt");
        let m = model(true);
        save(&path, &m, Counters::default()).unwrap();
        assert!(!path.with_extension("tmp").exists());
        assert_eq!(load_matching(&path, &m.config).unwrap().0, m);
        let other = model(false).config;
        assert!(matches!(load_matching(&path, &other), Err(Error::CheckpointMismatch(_))));
    }
}
