//! Flat `key=value` config files and the flag > file > default merge.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mpsenet::StftConfig;

use crate::Failure;

const KEYS: [&str; 8] = [
    "seed",
    "task",
    "weights",
    "grid",
    "n_fft",
    "win_length",
    "hop_length",
    "compression",
];

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Failure::usage(format!("config line {}: expected key=value", n + 1)));
            };
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Failure::usage(format!("config line {}: unknown key {k:?}", n + 1)));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, Failure> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Failure::usage(format!("config key {key}: bad value {v:?}")))
            })
            .transpose()
    }

    pub fn seed(&self, flag: Option<u64>) -> Result<u64, Failure> {
        Ok(flag.or(self.parsed("seed")?).unwrap_or(0))
    }

    pub fn weights(&self, flag: Option<PathBuf>) -> Result<PathBuf, Failure> {
        flag.or_else(|| self.get("weights").map(PathBuf::from))
            .ok_or_else(|| Failure::usage("no weights given (--weights or `weights=` in the config file)"))
    }

    pub fn stft(&self) -> Result<StftConfig, Failure> {
        let mut cfg = StftConfig::default();
        if let Some(v) = self.parsed("n_fft")? {
            cfg.n_fft = v;
        }
        if let Some(v) = self.parsed("win_length")? {
            cfg.win_length = v;
        }
        if let Some(v) = self.parsed("hop_length")? {
            cfg.hop_length = v;
        }
        if let Some(v) = self.parsed("compression")? {
            cfg.compression = v;
        }
        cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
        Ok(cfg)
    }
}
