//! Named parameter storage and its on-disk form.
//!
//! A weights directory holds three files:
//!
//! * `config.txt`: the [`ModelConfig`] as `key=value` lines;
//! * `weights.bin`: every tensor as little-endian `f32`, back to back;
//! * `manifest.txt`: one line per tensor,
//!   `<path> f32 <d0>x<d1>... <byte offset> <checksum>`, where the checksum is
//!   the first eight bytes of the SHA-256 of the tensor's bytes, in hex.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{ArrayView1, ArrayView2, ArrayView4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::nn::config::{ModelConfig, TaskHead};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const BLOB_FILE: &str = "weights.bin";
pub const CONFIG_FILE: &str = "config.txt";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WeightError {
    #[error("checksum mismatch for parameter {param}: manifest {expected:016x}, data {found:016x}")]
    ChecksumMismatch { param: String, expected: u64, found: u64 },

    #[error("missing parameter {param}")]
    MissingParameter { param: String },

    #[error("unexpected parameter {param}")]
    UnexpectedParameter { param: String },

    #[error("shape mismatch for parameter {param}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        param: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("parameter {param} lies outside the weight blob")]
    OutOfRange { param: String },
}

/// How a parameter is initialised by [`init_random`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform on `±1/√fan_in`.
    Uniform { fan_in: usize },
    Constant(f32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub path: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape("tensor data", &[n], &[data.len()]));
        }
        Ok(Self { shape, data })
    }

    pub fn filled(shape: Vec<usize>, v: f32) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![v; n] }
    }

    fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub checksum: u64,
}

impl ManifestEntry {
    fn byte_len(&self) -> usize {
        self.shape.iter().product::<usize>() * 4
    }
}

pub fn checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_be_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
}

/// Parameters by dotted path.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    params: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: impl Into<String>, tensor: Tensor) -> Option<Tensor> {
        self.params.insert(path.into(), tensor)
    }

    pub fn remove(&mut self, path: &str) -> Option<Tensor> {
        self.params.remove(path)
    }

    pub fn get(&self, path: &str) -> Option<&Tensor> {
        self.params.get(path)
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut Tensor> {
        self.params.get_mut(path)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn parameter_count(&self) -> usize {
        self.params.values().map(|t| t.data.len()).sum()
    }

    /// Manifest entries in the order tensors are laid out in the blob.
    pub fn manifest(&self) -> Vec<ManifestEntry> {
        let mut offset = 0;
        self.params
            .iter()
            .map(|(path, t)| {
                let e = ManifestEntry {
                    path: path.clone(),
                    shape: t.shape.clone(),
                    offset,
                    checksum: checksum(&t.to_le_bytes()),
                };
                offset += e.byte_len();
                e
            })
            .collect()
    }

    /// Checks the store holds exactly the parameters `cfg` needs, with the right shapes.
    pub fn check_against(&self, cfg: &ModelConfig) -> Result<()> {
        let specs = param_specs(cfg)?;
        for spec in &specs {
            match self.params.get(&spec.path) {
                None => {
                    return Err(WeightError::MissingParameter { param: spec.path.clone() }.into())
                }
                Some(t) if t.shape != spec.shape => {
                    return Err(WeightError::ShapeMismatch {
                        param: spec.path.clone(),
                        expected: spec.shape.clone(),
                        found: t.shape.clone(),
                    }
                    .into())
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = self
            .params
            .keys()
            .find(|k| !specs.iter().any(|s| &s.path == *k))
        {
            return Err(WeightError::UnexpectedParameter { param: extra.clone() }.into());
        }
        Ok(())
    }

    fn lookup(&self, path: &str, rank: usize) -> Result<&Tensor> {
        let t = self
            .params
            .get(path)
            .ok_or_else(|| WeightError::MissingParameter { param: path.to_string() })?;
        if t.shape.len() != rank {
            return Err(WeightError::ShapeMismatch {
                param: path.to_string(),
                expected: vec![0; rank],
                found: t.shape.clone(),
            }
            .into());
        }
        Ok(t)
    }

    pub fn view1(&self, path: &str) -> Result<ArrayView1<'_, f32>> {
        let t = self.lookup(path, 1)?;
        Ok(ArrayView1::from(&t.data[..]))
    }

    pub fn view2(&self, path: &str) -> Result<ArrayView2<'_, f32>> {
        let t = self.lookup(path, 2)?;
        Ok(ArrayView2::from_shape((t.shape[0], t.shape[1]), &t.data).expect("validated shape"))
    }

    pub fn view4(&self, path: &str) -> Result<ArrayView4<'_, f32>> {
        let t = self.lookup(path, 4)?;
        let s = &t.shape;
        Ok(ArrayView4::from_shape((s[0], s[1], s[2], s[3]), &t.data).expect("validated shape"))
    }
}

fn push(out: &mut Vec<ParamSpec>, path: String, shape: Vec<usize>, init: Init) {
    out.push(ParamSpec { path, shape, init });
}

fn conv_spec(out: &mut Vec<ParamSpec>, prefix: &str, cout: usize, cin: usize, kh: usize, kw: usize) {
    let fan_in = cin * kh * kw;
    push(out, format!("{prefix}.weight"), vec![cout, cin, kh, kw], Init::Uniform { fan_in });
    push(out, format!("{prefix}.bias"), vec![cout], Init::Uniform { fan_in });
}

fn norm_spec(out: &mut Vec<ParamSpec>, prefix: &str, c: usize) {
    push(out, format!("{prefix}.weight"), vec![c], Init::Constant(1.0));
    push(out, format!("{prefix}.bias"), vec![c], Init::Constant(0.0));
}

fn linear_spec(out: &mut Vec<ParamSpec>, prefix: &str, dout: usize, din: usize) {
    push(out, format!("{prefix}.weight"), vec![dout, din], Init::Uniform { fan_in: din });
    push(out, format!("{prefix}.bias"), vec![dout], Init::Uniform { fan_in: din });
}

/// Convolution, instance norm and PReLU.
fn conv_block_spec(out: &mut Vec<ParamSpec>, prefix: &str, cout: usize, cin: usize, kh: usize, kw: usize) {
    conv_spec(out, &format!("{prefix}.conv"), cout, cin, kh, kw);
    norm_spec(out, &format!("{prefix}.norm"), cout);
    push(out, format!("{prefix}.act.slope"), vec![cout], Init::Constant(0.25));
}

fn dense_spec(out: &mut Vec<ParamSpec>, prefix: &str, cfg: &ModelConfig) {
    let c = cfg.channels;
    for i in 0..cfg.dense_dilations.len() {
        conv_block_spec(out, &format!("{prefix}.{i}"), c, c * (i + 1), 3, 3);
    }
}

fn transformer_spec(out: &mut Vec<ParamSpec>, prefix: &str, c: usize) {
    norm_spec(out, &format!("{prefix}.norm1"), c);
    linear_spec(out, &format!("{prefix}.attn.in_proj"), 3 * c, c);
    linear_spec(out, &format!("{prefix}.attn.out_proj"), c, c);
    norm_spec(out, &format!("{prefix}.norm2"), c);
    for dir in ["forward", "backward"] {
        let p = format!("{prefix}.gru.{dir}");
        let u = Init::Uniform { fan_in: c };
        push(out, format!("{p}.weight_ih"), vec![3 * c, c], u);
        push(out, format!("{p}.weight_hh"), vec![3 * c, c], u);
        push(out, format!("{p}.bias_ih"), vec![3 * c], u);
        push(out, format!("{p}.bias_hh"), vec![3 * c], u);
    }
    linear_spec(out, &format!("{prefix}.ffn"), c, 2 * c);
}

fn upsample_spec(out: &mut Vec<ParamSpec>, prefix: &str, c: usize) {
    conv_spec(out, &format!("{prefix}.upsample.conv"), 2 * c, c, 1, 3);
    norm_spec(out, &format!("{prefix}.upsample.norm"), c);
    push(out, format!("{prefix}.upsample.act.slope"), vec![c], Init::Constant(0.25));
}

/// Every parameter the network reads for `cfg`, in a fixed order.
pub fn param_specs(cfg: &ModelConfig) -> Result<Vec<ParamSpec>> {
    cfg.validate()?;
    let c = cfg.channels;
    let mut out = Vec::new();

    conv_block_spec(&mut out, "encoder.input", c, 2, 1, 3);
    dense_spec(&mut out, "encoder.dense", cfg);
    conv_block_spec(&mut out, "encoder.reduce", c, c, 1, 3);

    for n in 0..cfg.n_blocks {
        transformer_spec(&mut out, &format!("blocks.{n}.time"), c);
        transformer_spec(&mut out, &format!("blocks.{n}.freq"), c);
    }

    dense_spec(&mut out, "mask_decoder.dense", cfg);
    upsample_spec(&mut out, "mask_decoder", c);
    conv_spec(&mut out, "mask_decoder.head", 1, c, 1, 1);
    match cfg.task_head {
        TaskHead::BoundedMask => push(
            &mut out,
            "mask_decoder.lsigmoid.alpha".into(),
            vec![cfg.freq_bins],
            Init::Constant(1.0),
        ),
        TaskHead::UnboundedMask => push(
            &mut out,
            "mask_decoder.activation.slope".into(),
            vec![1],
            Init::Constant(0.25),
        ),
    }

    dense_spec(&mut out, "phase_decoder.dense", cfg);
    upsample_spec(&mut out, "phase_decoder", c);
    conv_spec(&mut out, "phase_decoder.real", 1, c, 1, 1);
    conv_spec(&mut out, "phase_decoder.imag", 1, c, 1, 1);
    Ok(out)
}

/// Seeded initialisation: weights and biases uniform on `±1/√fan_in`,
/// norm gains one, norm shifts zero, PReLU slopes 0.25, sigmoid slopes one.
pub fn init_random(cfg: &ModelConfig, seed: u64) -> Result<WeightStore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = WeightStore::new();
    for spec in param_specs(cfg)? {
        let tensor = match spec.init {
            Init::Constant(v) => Tensor::filled(spec.shape, v),
            Init::Uniform { fan_in } => {
                let k = 1.0 / (fan_in as f32).sqrt();
                let n = spec.shape.iter().product();
                let data = (0..n).map(|_| rng.random_range(-k..k)).collect();
                Tensor { shape: spec.shape, data }
            }
        };
        store.insert(spec.path, tensor);
    }
    Ok(store)
}

fn format_shape(shape: &[usize]) -> String {
    shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
}

pub fn manifest_to_text(entries: &[ManifestEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        writeln!(
            s,
            "{} f32 {} {} {:016x}",
            e.path,
            format_shape(&e.shape),
            e.offset,
            e.checksum
        )
        .unwrap();
    }
    s
}

pub fn manifest_from_text(text: &str) -> Result<Vec<ManifestEntry>, WeightError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| WeightError::Manifest {
            line: i + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [path, dtype, shape, offset, sum] = fields[..] else {
            return Err(bad("expected 5 fields"));
        };
        if dtype != "f32" {
            return Err(bad(&format!("unsupported dtype {dtype}")));
        }
        let shape = shape
            .split('x')
            .map(|d| d.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("bad shape"))?;
        let offset = offset.parse().map_err(|_| bad("bad offset"))?;
        let checksum = u64::from_str_radix(sum, 16).map_err(|_| bad("bad checksum"))?;
        out.push(ManifestEntry {
            path: path.to_string(),
            shape,
            offset,
            checksum,
        });
    }
    Ok(out)
}

/// Writes `config.txt`, `weights.bin` and `manifest.txt` into `dir`, creating it if needed.
pub fn save_weights(store: &WeightStore, cfg: &ModelConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob = Vec::with_capacity(store.parameter_count() * 4);
    for (_, t) in store.iter() {
        blob.extend_from_slice(&t.to_le_bytes());
    }
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    };
    write(BLOB_FILE, &blob)?;
    write(MANIFEST_FILE, manifest_to_text(&store.manifest()).as_bytes())?;
    write(CONFIG_FILE, cfg.to_text().as_bytes())?;
    Ok(())
}

/// Reads a weights directory, verifying every checksum and the parameter set.
pub fn load_weights(dir: &Path) -> Result<(ModelConfig, WeightStore)> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read(&p).map_err(|e| Error::io(p, e))
    };
    let cfg_text = String::from_utf8_lossy(&read(CONFIG_FILE)?).into_owned();
    let cfg = ModelConfig::from_text(&cfg_text)?;
    let manifest_text = String::from_utf8_lossy(&read(MANIFEST_FILE)?).into_owned();
    let entries = manifest_from_text(&manifest_text)?;
    let blob = read(BLOB_FILE)?;

    let mut store = WeightStore::new();
    for e in entries {
        let end = e.offset.checked_add(e.byte_len());
        let bytes = match end {
            Some(end) if end <= blob.len() => &blob[e.offset..end],
            _ => return Err(WeightError::OutOfRange { param: e.path }.into()),
        };
        let found = checksum(bytes);
        if found != e.checksum {
            return Err(WeightError::ChecksumMismatch {
                param: e.path,
                expected: e.checksum,
                found,
            }
            .into());
        }
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("chunk of 4")))
            .collect();
        store.insert(e.path, Tensor { shape: e.shape, data });
    }
    store.check_against(&cfg)?;
    Ok((cfg, store))
}
