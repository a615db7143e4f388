//! Model checkpoints and the shared tensor container.
//!
//! Layout (all integers little-endian u32, floats little-endian f32):
//!
//!   magic "EARS" | version | arch string | front-end tag string |
//!   NormStats (dim, means, stds) | block count |
//!   blocks: name | rank (2) | dims | data
//!
//! Strings are length-prefixed UTF-8. Parameters live in f64 in memory and
//! are quantized to f32 on disk; `Checkpoint::quantize` applies the same
//! rounding in memory so validation losses reported by the trainer match a
//! reloaded checkpoint bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::NormStats;
use crate::frontend::FrontendKind;
use crate::nnet::model::{Model, NamedBlock};

const MAGIC: &[u8; 4] = b"EARS";
const VERSION: u32 = 1;
/// Architecture tag used by feature-cache files.
pub const CACHE_ARCH: &str = "cache";

/// Upper bounds the reader enforces before allocating.
const MAX_STRING: u32 = 4096;
const MAX_BLOCKS: u32 = 10_000;
const MAX_ELEMS: u64 = 1 << 30;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub frontend: FrontendKind,
    pub stats: NormStats,
    pub model: Model,
}

/// Raw decoded container, also used for feature caches.
pub struct BlockFile {
    pub arch: String,
    pub frontend_tag: String,
    pub stats: NormStats,
    /// (name, rows, cols, data) in file order.
    pub blocks: Vec<(String, usize, usize, Vec<f64>)>,
}

fn corrupt(detail: impl Into<String>) -> Error {
    Error::CheckpointCorrupt(detail.into())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            corrupt("truncated file")
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string(r: &mut impl Read, what: &str) -> Result<String> {
    let len = read_u32(r)?;
    if len > MAX_STRING {
        return Err(corrupt(format!("{what} length {len} exceeds {MAX_STRING}")));
    }
    let mut buf = vec![0u8; len as usize];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| corrupt(format!("{what} is not UTF-8")))
}

fn read_f32_vec(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 4];
    read_exact(r, &mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_string(w: &mut impl Write, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn write_f32_slice(w: &mut impl Write, data: &[f64]) -> Result<()> {
    for &v in data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Writes a container file.
pub fn write_blocks(
    path: &Path,
    arch: &str,
    frontend_tag: &str,
    stats: &NormStats,
    blocks: &[NamedBlock<'_>],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;
    write_string(&mut w, arch)?;
    write_string(&mut w, frontend_tag)?;
    write_u32(&mut w, stats.dim() as u32)?;
    write_f32_slice(&mut w, &stats.mean)?;
    write_f32_slice(&mut w, &stats.std)?;
    write_u32(&mut w, blocks.len() as u32)?;
    for b in blocks {
        debug_assert_eq!(b.rows * b.cols, b.data.len());
        write_string(&mut w, &b.name)?;
        write_u32(&mut w, 2)?;
        write_u32(&mut w, b.rows as u32)?;
        write_u32(&mut w, b.cols as u32)?;
        write_f32_slice(&mut w, b.data)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a container file back.
pub fn read_blocks(path: &Path) -> Result<BlockFile> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let arch = read_string(&mut r, "arch")?;
    let frontend_tag = read_string(&mut r, "frontend tag")?;
    let dim = read_u32(&mut r)?;
    if dim as u64 > MAX_ELEMS {
        return Err(corrupt(format!("stats dim {dim} out of range")));
    }
    let mean = read_f32_vec(&mut r, dim as usize)?;
    let std = read_f32_vec(&mut r, dim as usize)?;
    let count = read_u32(&mut r)?;
    if count > MAX_BLOCKS {
        return Err(corrupt(format!("block count {count} exceeds {MAX_BLOCKS}")));
    }
    let mut blocks = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name = read_string(&mut r, "block name")?;
        let rank = read_u32(&mut r)?;
        let (rows, cols) = match rank {
            1 => (1usize, read_u32(&mut r)? as usize),
            2 => {
                let rows = read_u32(&mut r)? as usize;
                let cols = read_u32(&mut r)? as usize;
                (rows, cols)
            }
            other => return Err(corrupt(format!("block '{name}' has rank {other}"))),
        };
        if (rows as u64) * (cols as u64) > MAX_ELEMS {
            return Err(corrupt(format!("block '{name}' too large: {rows}×{cols}")));
        }
        let data = read_f32_vec(&mut r, rows * cols)?;
        blocks.push((name, rows, cols, data));
    }
    // Trailing garbage means the writer and reader disagree.
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(corrupt("trailing bytes after last block")),
        Err(e) => return Err(Error::Io(e)),
    }
    Ok(BlockFile { arch, frontend_tag, stats: NormStats { mean, std }, blocks })
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_blocks(
            path,
            &self.model.arch_string(),
            self.frontend.tag(),
            &self.stats,
            &self.model.named_blocks(),
        )
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let file = read_blocks(path)?;
        if file.arch == CACHE_ARCH {
            return Err(corrupt("file is a feature cache, not a model checkpoint"));
        }
        let frontend = FrontendKind::parse(&file.frontend_tag)
            .map_err(|_| corrupt(format!("unknown front-end tag '{}'", file.frontend_tag)))?;
        let mut model = Model::from_arch(&file.arch)?;
        {
            let mut targets = model.named_blocks_mut();
            if targets.len() != file.blocks.len() {
                return Err(corrupt(format!(
                    "expected {} blocks for {}, file has {}",
                    targets.len(),
                    file.arch,
                    file.blocks.len()
                )));
            }
            for (target, (name, rows, cols, data)) in targets.iter_mut().zip(&file.blocks) {
                if &target.name != name {
                    return Err(corrupt(format!(
                        "block order mismatch: expected '{}', found '{name}'",
                        target.name
                    )));
                }
                if target.rows != *rows || target.cols != *cols {
                    return Err(corrupt(format!(
                        "block '{name}' is {rows}×{cols}, expected {}×{}",
                        target.rows, target.cols
                    )));
                }
                target.data.copy_from_slice(data);
            }
        }
        Ok(Checkpoint { frontend, stats: file.stats, model })
    }

    /// Rounds every parameter and statistic through f32, matching what a
    /// save/load round trip produces.
    pub fn quantize(&mut self) {
        for b in self.model.named_blocks_mut() {
            for v in b.data.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
        self.stats.round_to_f32();
    }
}

/// Writes one utterance's feature matrix as a cache file.
pub fn write_feature_cache(
    path: &Path,
    frontend: FrontendKind,
    features: &crate::nnet::Tensor2,
) -> Result<()> {
    let block = NamedBlock {
        name: "features".to_string(),
        rows: features.rows(),
        cols: features.cols(),
        data: features.data(),
    };
    let empty = NormStats { mean: Vec::new(), std: Vec::new() };
    write_blocks(path, CACHE_ARCH, frontend.tag(), &empty, &[block])
}

/// Reads a feature cache written by `write_feature_cache`.
pub fn read_feature_cache(path: &Path) -> Result<(FrontendKind, crate::nnet::Tensor2)> {
    let file = read_blocks(path)?;
    if file.arch != CACHE_ARCH {
        return Err(corrupt(format!("expected a feature cache, found arch '{}'", file.arch)));
    }
    let frontend = FrontendKind::parse(&file.frontend_tag)
        .map_err(|_| corrupt(format!("unknown front-end tag '{}'", file.frontend_tag)))?;
    let (name, rows, cols, data) = file
        .blocks
        .into_iter()
        .next()
        .ok_or_else(|| corrupt("feature cache has no blocks"))?;
    if name != "features" {
        return Err(corrupt(format!("unexpected block '{name}' in feature cache")));
    }
    Ok((frontend, crate::nnet::Tensor2::from_vec(rows, cols, data)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::model::{LstmModel, MlpModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_checkpoint(seed: u64) -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = MlpModel::with_dims(&[8, 5, 5, 5, 4], 0.9, &mut rng).unwrap();
        Checkpoint {
            frontend: FrontendKind::Drnl,
            stats: NormStats {
                mean: (0..8).map(|i| i as f64 * 0.25).collect(),
                std: vec![1.0; 8],
            },
            model: Model::Mlp(model),
        }
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut ck = sample_checkpoint(1);
        ck.quantize();
        ck.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.frontend, FrontendKind::Drnl);
        assert_eq!(loaded.model.arch_string(), "mlp:8-5-5-5-4");
        assert_eq!(loaded.stats.mean, ck.stats.mean);
        assert_eq!(loaded.stats.std, ck.stats.std);
        let a = ck.model.named_blocks();
        let b = loaded.model.named_blocks();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.data, y.data, "block {} changed in round trip", x.name);
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        let ck = sample_checkpoint(2);
        ck.save(&p1).unwrap();
        Checkpoint::load(&p1).unwrap().save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn lstm_checkpoint_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.ckpt");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = LstmModel::new(6, &mut rng).unwrap();
        model.bn[0].running_mean = (0..128).map(|i| i as f64 * 0.01).collect();
        let ck = Checkpoint {
            frontend: FrontendKind::Carfac,
            stats: NormStats { mean: vec![0.0; 128], std: vec![1.0; 128] },
            model: Model::Lstm(model),
        };
        ck.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.model.arch_string(), "lstm:128-6-6-64");
        match &loaded.model {
            Model::Lstm(m) => {
                assert!((m.bn[0].running_mean[100] - 1.0).abs() < 1e-6);
                assert!(m.layers[2].b[1].data().iter().all(|&v| v == 1.0), "forget bias");
            }
            _ => panic!("wrong model kind"),
        }
    }

    #[test]
    fn corruption_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");

        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::CheckpointCorrupt(_))));

        let ck = sample_checkpoint(4);
        ck.save(&path).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() / 2]).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::CheckpointCorrupt(_))));

        let mut extended = full.clone();
        extended.push(0);
        std::fs::write(&path, &extended).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::CheckpointCorrupt(_))));
    }

    #[test]
    fn feature_cache_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.feat");
        let feats = crate::nnet::Tensor2::from_vec(
            7,
            128,
            (0..7 * 128).map(|i| (i as f64 * 0.003) as f32 as f64).collect(),
        );
        write_feature_cache(&path, FrontendKind::Gt, &feats).unwrap();
        let (kind, back) = read_feature_cache(&path).unwrap();
        assert_eq!(kind, FrontendKind::Gt);
        assert_eq!(back.data(), feats.data());
        assert!(matches!(Checkpoint::load(&path), Err(Error::CheckpointCorrupt(_))));
    }
}
