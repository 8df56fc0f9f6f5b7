use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskHead {
    /// Learnable sigmoid mask in `(0, β)`; denoising and dereverberation.
    BoundedMask,
    /// PReLU mask with no upper bound; bandwidth extension.
    UnboundedMask,
}

impl TaskHead {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskHead::BoundedMask => "bounded_mask",
            TaskHead::UnboundedMask => "unbounded_mask",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bounded_mask" => Ok(TaskHead::BoundedMask),
            "unbounded_mask" => Ok(TaskHead::UnboundedMask),
            other => Err(Error::InvalidConfig(format!("unknown task_head {other:?}"))),
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub channels: usize,
    pub n_blocks: usize,
    pub n_heads: usize,
    pub dense_dilations: Vec<usize>,
    pub beta: f32,
    pub task_head: TaskHead,
    /// Spectrum bins F.
    pub freq_bins: usize,
    /// Bins after the encoder's strided convolution, `F / 2 + 1`.
    pub reduced_bins: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            channels: 64,
            n_blocks: 4,
            n_heads: 4,
            dense_dilations: vec![1, 2, 4, 8],
            beta: 2.0,
            task_head: TaskHead::BoundedMask,
            freq_bins: 201,
            reduced_bins: 101,
        }
    }
}

impl ModelConfig {
    /// A scaled-down configuration for tests and quick experiments.
    pub fn small(channels: usize, n_blocks: usize, n_heads: usize) -> Self {
        Self {
            channels,
            n_blocks,
            n_heads,
            ..Self::default()
        }
    }

    pub fn with_task_head(mut self, head: TaskHead) -> Self {
        self.task_head = head;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.channels == 0 || self.n_heads == 0 || self.channels % self.n_heads != 0 {
            return bad(format!(
                "channels ({}) must be a positive multiple of n_heads ({})",
                self.channels, self.n_heads
            ));
        }
        if self.dense_dilations.is_empty()
            || self.dense_dilations[0] == 0
            || self.dense_dilations.windows(2).any(|w| w[0] >= w[1])
        {
            return bad(format!(
                "dense_dilations must be positive and strictly increasing, got {:?}",
                self.dense_dilations
            ));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if self.freq_bins < 2 || self.reduced_bins != self.freq_bins / 2 + 1 {
            return bad(format!(
                "reduced_bins must be freq_bins / 2 + 1, got {} for {}",
                self.reduced_bins, self.freq_bins
            ));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let dil: Vec<String> = self.dense_dilations.iter().map(|d| d.to_string()).collect();
        writeln!(s, "channels={}", self.channels).unwrap();
        writeln!(s, "n_blocks={}", self.n_blocks).unwrap();
        writeln!(s, "n_heads={}", self.n_heads).unwrap();
        writeln!(s, "dense_dilations={}", dil.join(",")).unwrap();
        writeln!(s, "beta={}", self.beta).unwrap();
        writeln!(s, "task_head={}", self.task_head.as_str()).unwrap();
        writeln!(s, "freq_bins={}", self.freq_bins).unwrap();
        writeln!(s, "reduced_bins={}", self.reduced_bins).unwrap();
        s
    }

    /// Parses `key=value` lines; unknown keys are rejected, missing keys keep defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("malformed line {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::InvalidConfig(format!("{k}: not an integer: {v:?}")))
            };
            match k {
                "channels" => cfg.channels = int(v)?,
                "n_blocks" => cfg.n_blocks = int(v)?,
                "n_heads" => cfg.n_heads = int(v)?,
                "dense_dilations" => {
                    cfg.dense_dilations = v
                        .split(',')
                        .map(|d| int(d.trim()))
                        .collect::<Result<_>>()?
                }
                "beta" => {
                    cfg.beta = v
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("beta: bad value {v:?}")))?
                }
                "task_head" => cfg.task_head = TaskHead::parse(v)?,
                "freq_bins" => cfg.freq_bins = int(v)?,
                "reduced_bins" => cfg.reduced_bins = int(v)?,
                other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
