use std::collections::HashMap;
use std::io::Write;

use super::{put_f32s, to_u32, Reader};
use crate::error::{Error, Result};
use crate::model::{build_model, DcaeConfig, DcaeModel};
use crate::nn::OptimizerState;

const MAGIC: &[u8; 4] = b"EDAE";
const VERSION: u16 = 1;

/// Named tensors as stored on disk, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl Checkpoint {
    fn get(&self, name: &str) -> Option<(&[usize], &[f64])> {
        self.tensors
            .iter()
            .find(|t| t.0 == name)
            .map(|t| (t.1.as_slice(), t.2.as_slice()))
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::Corrupt(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Corrupt("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = r.u8()? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32()? as usize);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| Error::Corrupt(format!("{name}: dimensions overflow")))?;
            let data = r.f32s(n)?.into_iter().map(f64::from).collect();
            tensors.push((name, dims, data));
        }
        r.finish()?;
        Ok(Self { tensors })
    }
}

fn incompatible(msg: impl Into<String>) -> Error {
    Error::IncompatibleCheckpoint(msg.into())
}

/// Widens an f32-stored scalar to the f64 with the same shortest decimal
/// spelling, so 0.1 comes back as 0.1.
fn widen_exact(v: f64) -> f64 {
    let s = (v as f32).to_string();
    s.parse().unwrap_or(v)
}

fn config_tensors(cfg: &DcaeConfig) -> Vec<(String, Vec<f64>)> {
    vec![
        (
            "config.encoder_channels".into(),
            cfg.encoder_channels.iter().map(|&c| c as f64).collect(),
        ),
        (
            "config.kernel_sizes".into(),
            cfg.kernel_sizes.iter().map(|&k| k as f64).collect(),
        ),
        ("config.stride".into(), vec![cfg.stride as f64]),
        ("config.dropout_p".into(), vec![cfg.dropout_p]),
        ("config.input_length".into(), vec![cfg.input_length as f64]),
    ]
}

fn config_from(ck: &Checkpoint) -> Result<DcaeConfig> {
    let get = |name: &str| {
        ck.get(name)
            .map(|t| t.1)
            .ok_or_else(|| incompatible(format!("missing {name}")))
    };
    let ints = |name: &str| -> Result<Vec<usize>> {
        get(name)?
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(incompatible(format!("{name} holds non-integer {v}")))
                }
            })
            .collect()
    };
    let scalar = |name: &str| -> Result<f64> {
        match get(name)? {
            [v] => Ok(*v),
            _ => Err(incompatible(format!("{name} must hold one value"))),
        }
    };
    let one_int = |name: &str| -> Result<usize> {
        match ints(name)?.as_slice() {
            [v] => Ok(*v),
            _ => Err(incompatible(format!("{name} must hold one value"))),
        }
    };
    Ok(DcaeConfig {
        encoder_channels: ints("config.encoder_channels")?,
        kernel_sizes: ints("config.kernel_sizes")?,
        stride: one_int("config.stride")?,
        dropout_p: widen_exact(scalar("config.dropout_p")?),
        input_length: one_int("config.input_length")?,
    })
}

/// Writes the config, every parameter and batch-norm buffer, and the
/// optimizer moments when given.
pub fn save_checkpoint<W: Write>(
    out: &mut W,
    model: &DcaeModel,
    optimizer: Option<&OptimizerState>,
) -> Result<()> {
    let mut entries: Vec<(String, Vec<usize>, Vec<f64>)> = config_tensors(&model.config)
        .into_iter()
        .map(|(n, v)| {
            let len = v.len();
            (n, vec![len], v)
        })
        .collect();
    for t in model.named_tensors() {
        entries.push((t.name.to_string(), t.shape.to_vec(), t.data.to_vec()));
    }
    if let Some(opt) = optimizer.filter(|o| !o.first.is_empty()) {
        let params = model.params();
        if opt.first.len() != params.len() || opt.second.len() != params.len() {
            return Err(Error::Shape(
                "optimizer state does not match the model".into(),
            ));
        }
        entries.push(("adam.step".into(), vec![1], vec![opt.step as f64]));
        for ((p, m), v) in params.iter().zip(&opt.first).zip(&opt.second) {
            entries.push((format!("adam.m.{}", p.name), p.shape.clone(), m.clone()));
            entries.push((format!("adam.v.{}", p.name), p.shape.clone(), v.clone()));
        }
    }

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&to_u32(entries.len(), "tensor count")?.to_le_bytes());
    for (name, dims, data) in entries {
        let name_len = u16::try_from(name.len())
            .map_err(|_| Error::InvalidArgument(format!("tensor name too long: {name}")))?;
        buf.extend_from_slice(&name_len.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(
            u8::try_from(dims.len()).map_err(|_| Error::InvalidArgument("rank > 255".into()))?,
        );
        for d in &dims {
            buf.extend_from_slice(&to_u32(*d, "dimension")?.to_le_bytes());
        }
        put_f32s(&mut buf, data);
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Restores every tensor of `model` from `bytes`. The stored config must
/// equal the model's and every tensor must be present with its shape.
pub fn load_into(bytes: &[u8], model: &mut DcaeModel) -> Result<Option<OptimizerState>> {
    let ck = Checkpoint::parse(bytes)?;
    let cfg = config_from(&ck)?;
    if cfg != model.config {
        return Err(incompatible(format!(
            "checkpoint config {cfg:?} differs from model config {:?}",
            model.config
        )));
    }
    let expected: Vec<(String, Vec<usize>)> = model
        .named_tensors()
        .iter()
        .map(|t| (t.name.to_string(), t.shape.to_vec()))
        .collect();
    let mut known: HashMap<&str, bool> = HashMap::new();
    for (name, shape) in &expected {
        let (dims, data) = ck
            .get(name)
            .ok_or_else(|| incompatible(format!("missing tensor {name}")))?;
        if dims != shape.as_slice() {
            return Err(incompatible(format!(
                "{name}: stored {dims:?}, model {shape:?}"
            )));
        }
        model.net.set_tensor(name, data)?;
        known.insert(name, true);
    }

    let names: Vec<String> = model.params().iter().map(|p| p.name.clone()).collect();
    let optimizer = match ck.get("adam.step") {
        None => None,
        Some((_, step)) => {
            let step = match step {
                [s] if *s >= 0.0 && s.fract() == 0.0 => *s as u64,
                _ => return Err(incompatible("adam.step must be one whole number")),
            };
            let mut st = OptimizerState {
                step,
                first: Vec::new(),
                second: Vec::new(),
            };
            for (name, shape) in names
                .iter()
                .zip(model.params().iter().map(|p| p.shape.clone()))
            {
                for (prefix, dst) in [("adam.m.", &mut st.first), ("adam.v.", &mut st.second)] {
                    let key = format!("{prefix}{name}");
                    let (dims, data) = ck
                        .get(&key)
                        .ok_or_else(|| incompatible(format!("missing tensor {key}")))?;
                    if dims != shape.as_slice() {
                        return Err(incompatible(format!(
                            "{key}: stored {dims:?}, model {shape:?}"
                        )));
                    }
                    dst.push(data.to_vec());
                }
            }
            Some(st)
        }
    };
    let moments = optimizer.as_ref().map_or(0, |o| 1 + 2 * o.first.len());
    let extra = ck.tensors.len() - 5 - expected.len() - moments;
    if extra != 0 {
        return Err(incompatible(format!("{extra} unrecognized tensors")));
    }
    Ok(optimizer)
}

/// Builds a model from the stored config and loads it.
pub fn load_checkpoint(bytes: &[u8]) -> Result<(DcaeModel, Option<OptimizerState>)> {
    let ck = Checkpoint::parse(bytes)?;
    let cfg = config_from(&ck)?;
    let mut model =
        build_model(&cfg, 0).map_err(|e| incompatible(format!("stored config: {e}")))?;
    let opt = load_into(bytes, &mut model)?;
    Ok((model, opt))
}
