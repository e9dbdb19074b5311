//! Versioned binary checkpoints.
//!
//! Layout: 4-byte magic, little-endian u32 format version, length-prefixed
//! UTF-8 `key=value` header (config, sizes, vocabulary hash, step count),
//! then the raw little-endian f64 parameter block: centers, radii, rotation
//! parameters per relation per block. Saving and re-loading reproduces every
//! parameter bit-exactly, so reruns with a fixed seed produce byte-identical
//! files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, SphereError};
use crate::model::{ModelConfig, SphereModel};
use crate::rotation::{RotationKind, RotationParams};

pub const MAGIC: [u8; 4] = *b"SKGE";
pub const VERSION: u32 = 1;

/// A trained model plus the metadata needed to use it safely.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: SphereModel,
    /// [`crate::kg::Vocabulary::stable_hash`] of the training data.
    pub vocab_hash: u64,
    pub trained_steps: u64,
}

fn fmt_err(msg: impl Into<String>) -> SphereError {
    SphereError::CheckpointFormat(msg.into())
}

impl Checkpoint {
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        let cfg = &self.model.config;
        let mut header = String::new();
        let mut kv = |k: &str, v: String| {
            header.push_str(k);
            header.push('=');
            header.push_str(&v);
            header.push('\n');
        };
        kv("k", cfg.k.to_string());
        kv("n_blocks", cfg.n_blocks.to_string());
        kv("gamma", cfg.gamma.to_string());
        kv("alpha", cfg.alpha.to_string());
        kv("beta", cfg.beta.to_string());
        kv("p_norm", cfg.p_norm.to_string());
        kv("adv_temperature", cfg.adv_temperature.to_string());
        kv("learning_rate", cfg.learning_rate.to_string());
        kv("neg_count", cfg.neg_count.to_string());
        kv("batch_size", cfg.batch_size.to_string());
        kv("steps", cfg.steps.to_string());
        kv("seed", cfg.seed.to_string());
        kv("rmp_threshold", cfg.rmp_threshold.to_string());
        kv("reflections", cfg.reflections.to_string());
        kv("log_every", cfg.log_every.to_string());
        kv("filter_negatives", cfg.filter_negatives.to_string());
        kv("n_entities", self.model.n_entities.to_string());
        kv("n_relations", self.model.n_relations.to_string());
        kv("vocab_hash", format!("{:#018x}", self.vocab_hash));
        kv("trained_steps", self.trained_steps.to_string());

        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(header.as_bytes())?;
        let mut write_f64s = |vals: &[f64]| -> Result<()> {
            for v in vals {
                w.write_all(&v.to_le_bytes())?;
            }
            Ok(())
        };
        write_f64s(&self.model.centers)?;
        write_f64s(&self.model.radii)?;
        for rel in &self.model.rotations {
            for block in rel {
                write_f64s(block.params())?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(fmt_err("bad magic: not a checkpoint file"));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != VERSION {
            return Err(SphereError::CheckpointVersion { found: version, expected: VERSION });
        }
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let header_len = u64::from_le_bytes(u64buf) as usize;
        if header_len > 1 << 20 {
            return Err(fmt_err(format!("implausible header length {header_len}")));
        }
        let mut header = vec![0u8; header_len];
        r.read_exact(&mut header)?;
        let header =
            String::from_utf8(header).map_err(|_| fmt_err("header is not valid UTF-8"))?;

        let get = |key: &str| -> Result<String> {
            header
                .lines()
                .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
                .map(str::to_owned)
                .ok_or_else(|| fmt_err(format!("missing header key `{key}`")))
        };
        fn parse<T: std::str::FromStr>(key: &str, v: String) -> Result<T> {
            v.parse().map_err(|_| fmt_err(format!("bad value for `{key}`: {v}")))
        }

        let config = ModelConfig {
            k: parse("k", get("k")?)?,
            n_blocks: parse("n_blocks", get("n_blocks")?)?,
            gamma: parse("gamma", get("gamma")?)?,
            alpha: parse("alpha", get("alpha")?)?,
            beta: parse("beta", get("beta")?)?,
            p_norm: parse("p_norm", get("p_norm")?)?,
            adv_temperature: parse("adv_temperature", get("adv_temperature")?)?,
            learning_rate: parse("learning_rate", get("learning_rate")?)?,
            neg_count: parse("neg_count", get("neg_count")?)?,
            batch_size: parse("batch_size", get("batch_size")?)?,
            steps: parse("steps", get("steps")?)?,
            seed: parse("seed", get("seed")?)?,
            rmp_threshold: parse("rmp_threshold", get("rmp_threshold")?)?,
            reflections: parse("reflections", get("reflections")?)?,
            log_every: parse("log_every", get("log_every")?)?,
            filter_negatives: parse("filter_negatives", get("filter_negatives")?)?,
        };
        config.validate()?;
        let n_entities: usize = parse("n_entities", get("n_entities")?)?;
        let n_relations: usize = parse("n_relations", get("n_relations")?)?;
        let vocab_hash_text = get("vocab_hash")?;
        let vocab_hash = u64::from_str_radix(
            vocab_hash_text.trim_start_matches("0x"),
            16,
        )
        .map_err(|_| fmt_err(format!("bad vocab_hash: {vocab_hash_text}")))?;
        let trained_steps: u64 = parse("trained_steps", get("trained_steps")?)?;

        let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; n * 8];
            r.read_exact(&mut bytes).map_err(|e| {
                fmt_err(format!("parameter block truncated ({e})"))
            })?;
            Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let dim = config.dim();
        let centers = read_f64s(n_entities * dim)?;
        let radii = read_f64s(n_entities)?;
        let kind = config.rotation_kind();
        let per_block = kind.param_count();
        let mut rotations = Vec::with_capacity(n_relations);
        for _ in 0..n_relations {
            let mut blocks = Vec::with_capacity(config.n_blocks);
            for _ in 0..config.n_blocks {
                let params = read_f64s(per_block)?;
                blocks.push(match kind {
                    RotationKind::Angle2 => RotationParams::Angle2D { theta: params[0] },
                    RotationKind::Quat3 => RotationParams::Quat3D {
                        q: [params[0], params[1], params[2], params[3]],
                    },
                    RotationKind::Householder { dim, .. } => {
                        RotationParams::HouseholderKD { dim, normals: params }
                    }
                });
            }
            rotations.push(blocks);
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(fmt_err("trailing bytes after parameter block"));
        }
        Ok(Checkpoint {
            model: SphereModel { config, n_entities, n_relations, centers, radii, rotations },
            vocab_hash,
            trained_steps,
        })
    }

    pub fn save_to_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        Self::load(BufReader::new(File::open(path).map_err(|e| {
            SphereError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?))
    }
}
