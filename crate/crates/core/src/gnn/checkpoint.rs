use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use difftape::Tensor;
use sha2::{Digest, Sha256};

use super::model::{layout, GnnConfig, GnnParams};
use crate::error::{DrapeError, Result};

const MAGIC: &str = "drape-checkpoint 1";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const OPTIMIZER_FILE: &str = "optimizer.bin";

/// Adaptive-moment state, one entry per scalar of
/// `[params..., log_eta_scale, delta_raw]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn zeros(len: usize) -> Self {
        OptimizerState { step: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }
}

/// Everything needed to resume training or run inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: GnnParams,
    pub log_eta_scale: f64,
    pub delta_raw: f64,
    pub iteration: u64,
    pub fingerprint: String,
    pub optimizer: Option<OptimizerState>,
}

/// Hex SHA-256 of a configuration description.
pub fn fingerprint(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn bad(msg: impl Into<String>) -> DrapeError {
    DrapeError::Checkpoint(msg.into())
}

fn parse_config(text: &str) -> Result<GnnConfig> {
    let mut cfg = GnnConfig::default();
    for item in text.split_whitespace() {
        let (k, v) = item.split_once('=').ok_or_else(|| bad(format!("config entry `{item}` is not key=value")))?;
        let int = || v.parse::<usize>().map_err(|_| bad(format!("config `{k}` has bad value `{v}`")));
        match k {
            "latent" => cfg.latent = int()?,
            "blocks" => cfg.blocks = int()?,
            "hidden_layers" => cfg.hidden_layers = int()?,
            "output_scale" => cfg.output_scale = v.parse().map_err(|_| bad(format!("config `{k}` has bad value `{v}`")))?,
            _ => return Err(bad(format!("unknown config key `{k}`"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_f64s(bytes: &[u8]) -> Vec<f64> {
    bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
}

impl Checkpoint {
    /// Writes the manifest, single-precision weights and, if present, the
    /// optimizer moments into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| DrapeError::io(dir, e))?;
        let slots = layout(&self.params.config);
        let mut manifest = String::new();
        writeln!(manifest, "{MAGIC}").unwrap();
        writeln!(manifest, "config {}", self.params.config.describe()).unwrap();
        writeln!(manifest, "iteration {}", self.iteration).unwrap();
        writeln!(manifest, "fingerprint {}", self.fingerprint).unwrap();
        writeln!(manifest, "log_eta_scale {:?}", self.log_eta_scale).unwrap();
        writeln!(manifest, "delta_raw {:?}", self.delta_raw).unwrap();
        if let Some(opt) = &self.optimizer {
            writeln!(manifest, "optimizer_step {}", opt.step).unwrap();
        }
        let mut weights = Vec::with_capacity(4 * self.params.num_scalars());
        for (slot, t) in slots.iter().zip(&self.params.tensors) {
            writeln!(manifest, "tensor {} {} {}", slot.name, slot.shape[0], slot.shape[1]).unwrap();
            for &v in t.iter() {
                let s = v as f32;
                if s as f64 != v {
                    return Err(bad(format!("tensor `{}` holds a value not representable in single precision", slot.name)));
                }
                weights.extend_from_slice(&s.to_le_bytes());
            }
        }
        let write = |name: &str, bytes: &[u8]| {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| DrapeError::io(p, e))
        };
        write(MANIFEST_FILE, manifest.as_bytes())?;
        write(WEIGHTS_FILE, &weights)?;
        if let Some(opt) = &self.optimizer {
            let bytes: Vec<u8> = opt.m.iter().chain(&opt.v).flat_map(|v| v.to_le_bytes()).collect();
            write(OPTIMIZER_FILE, &bytes)?;
        }
        Ok(())
    }

    /// Reads a checkpoint, validating tensor names and shapes against the
    /// stored configuration and, if given, against `expected`.
    pub fn load(dir: &Path, expected: Option<&GnnConfig>) -> Result<Checkpoint> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read(&p).map_err(|e| DrapeError::io(p, e))
        };
        let manifest = String::from_utf8(read(MANIFEST_FILE)?).map_err(|_| bad("manifest is not UTF-8"))?;
        let mut lines = manifest.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("manifest header missing"));
        }
        let mut config = None;
        let mut iteration = None;
        let mut fp = None;
        let mut log_eta_scale = None;
        let mut delta_raw = None;
        let mut opt_step = None;
        let mut shapes = Vec::new();
        for line in lines {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let num = |what: &str| rest.parse::<f64>().map_err(|_| bad(format!("bad {what} `{rest}`")));
            match key {
                "config" => config = Some(parse_config(rest)?),
                "iteration" => iteration = Some(rest.parse::<u64>().map_err(|_| bad("bad iteration"))?),
                "fingerprint" => fp = Some(rest.to_string()),
                "log_eta_scale" => log_eta_scale = Some(num("log_eta_scale")?),
                "delta_raw" => delta_raw = Some(num("delta_raw")?),
                "optimizer_step" => opt_step = Some(rest.parse::<u64>().map_err(|_| bad("bad optimizer_step"))?),
                "tensor" => {
                    let parts: Vec<&str> = rest.split_whitespace().collect();
                    let dims = match parts.as_slice() {
                        [name, r, c] => (name.to_string(), r.parse::<usize>(), c.parse::<usize>()),
                        _ => return Err(bad(format!("bad tensor line `{line}`"))),
                    };
                    match dims {
                        (name, Ok(r), Ok(c)) => shapes.push((name, [r, c])),
                        _ => return Err(bad(format!("bad tensor line `{line}`"))),
                    }
                }
                "" => {}
                _ => return Err(bad(format!("unknown manifest key `{key}`"))),
            }
        }
        let missing = |k: &str| bad(format!("manifest lacks `{k}`"));
        let config = config.ok_or_else(|| missing("config"))?;
        if let Some(e) = expected {
            if e != &config {
                return Err(bad(format!("checkpoint network ({}) does not match the requested one ({})", config.describe(), e.describe())));
            }
        }
        let slots = layout(&config);
        if slots.len() != shapes.len() {
            return Err(bad(format!("expected {} tensors, manifest lists {}", slots.len(), shapes.len())));
        }
        for (slot, (name, shape)) in slots.iter().zip(&shapes) {
            if &slot.name != name || &slot.shape != shape {
                return Err(bad(format!(
                    "tensor `{name}` {}x{} does not match layout `{}` {}x{}",
                    shape[0], shape[1], slot.name, slot.shape[0], slot.shape[1]
                )));
            }
        }
        let weights = read(WEIGHTS_FILE)?;
        let total: usize = slots.iter().map(|s| s.shape[0] * s.shape[1]).sum();
        if weights.len() != 4 * total {
            return Err(bad(format!("weights file has {} bytes, expected {}", weights.len(), 4 * total)));
        }
        let mut values = weights.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        let tensors = slots
            .iter()
            .map(|s| Tensor::from_shape_fn((s.shape[0], s.shape[1]), |_| values.next().unwrap()))
            .collect();
        let params = GnnParams { config, tensors };
        let optimizer = match opt_step {
            None => None,
            Some(step) => {
                let all = read_f64s(&read(OPTIMIZER_FILE)?);
                let len = total + 2;
                if all.len() != 2 * len {
                    return Err(bad(format!("optimizer file holds {} values, expected {}", all.len(), 2 * len)));
                }
                Some(OptimizerState { step, m: all[..len].to_vec(), v: all[len..].to_vec() })
            }
        };
        Ok(Checkpoint {
            params,
            log_eta_scale: log_eta_scale.ok_or_else(|| missing("log_eta_scale"))?,
            delta_raw: delta_raw.ok_or_else(|| missing("delta_raw"))?,
            iteration: iteration.ok_or_else(|| missing("iteration"))?,
            fingerprint: fp.ok_or_else(|| missing("fingerprint"))?,
            optimizer,
        })
    }
}
