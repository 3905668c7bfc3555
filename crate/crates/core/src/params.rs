//! System constants and the flat `name = value` configuration format.
//!
//! ```text
//! # comments start with '#'
//! eta = 0.8
//! sigma2_dbm = -90      # or sigma2 = 1e-12 (watts)
//! C = 1000              # one value broadcasts to every WS
//! R_min = 100, 100, 150, 100
//! ```
//!
//! Keys are case-sensitive. Unknown keys are rejected by [`SystemParams`]
//! loading but preserved in [`KvConfig`] so other loaders (the gap scenario)
//! can share a file.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Parsed `name = value` pairs with the line each key came from.
#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                reason: format!("expected `name = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config {
                    line: line_no,
                    reason: "empty key".into(),
                });
            }
            if entries
                .insert(key.to_string(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Config {
                    line: line_no,
                    reason: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn scalar(&self, key: &str) -> Result<Option<f64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => parse_f64(v).map(Some).map_err(|reason| Error::Config {
                line: *line,
                reason: format!("`{key}`: {reason}"),
            }),
        }
    }

    pub fn count(&self, key: &str) -> Result<Option<usize>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<usize>().map(Some).map_err(|e| Error::Config {
                line: *line,
                reason: format!("`{key}`: {e}"),
            }),
        }
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|s| parse_f64(s.trim()))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|reason| Error::Config {
                    line: *line,
                    reason: format!("`{key}`: {reason}"),
                }),
        }
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>()
        .map_err(|e| format!("`{s}` is not a number ({e})"))
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Physical and system constants for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Energy conversion efficiency, in (0, 1].
    pub eta: f64,
    /// Frame length, seconds.
    pub frame: f64,
    /// Edge execution latency, seconds.
    pub edge_latency: f64,
    /// Offloading bandwidth, Hz.
    pub bandwidth: f64,
    /// AP noise power, watts.
    pub noise: f64,
    /// PS power budget, watts.
    pub p_max: f64,
    /// AP receive antennas.
    pub antennas: usize,
    /// CPU cycles per bit, per WS.
    pub cycles_per_bit: Vec<f64>,
    /// Switched capacitance, per WS.
    pub capacitance: Vec<f64>,
    /// Maximum CPU frequency, Hz, per WS.
    pub f_max: Vec<f64>,
    /// Minimum computed bits, per WS.
    pub r_min: Vec<f64>,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::uniform(4, 4)
    }
}

impl SystemParams {
    /// Default constants for `k` identical WSs and `n` AP antennas.
    pub fn uniform(k: usize, n: usize) -> Self {
        Self {
            eta: 0.8,
            frame: 1.0,
            edge_latency: 0.0,
            bandwidth: 1e3,
            noise: dbm_to_watts(-90.0),
            p_max: 1.0,
            antennas: n,
            cycles_per_bit: vec![1e3; k],
            capacitance: vec![1e-30; k],
            f_max: vec![1e6; k],
            r_min: vec![100.0; k],
        }
    }

    pub fn num_ws(&self) -> usize {
        self.cycles_per_bit.len()
    }

    /// Time available for offloading slots, `T - eps`.
    pub fn slot_budget(&self) -> f64 {
        self.frame - self.edge_latency
    }

    /// Copy with a different WS count; per-WS arrays are rebuilt from the
    /// first entry of each.
    pub fn with_num_ws(&self, k: usize) -> Self {
        let first = |v: &[f64]| v.first().copied().unwrap_or(0.0);
        Self {
            cycles_per_bit: vec![first(&self.cycles_per_bit); k],
            capacitance: vec![first(&self.capacitance); k],
            f_max: vec![first(&self.f_max); k],
            r_min: vec![first(&self.r_min); k],
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: &str| {
            Err(Error::InvalidParam {
                name: name.into(),
                reason: reason.into(),
            })
        };
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta", "must lie in (0, 1]");
        }
        for (name, v) in [
            ("T", self.frame),
            ("B", self.bandwidth),
            ("sigma2", self.noise),
            ("P_max", self.p_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name, "must be positive and finite");
            }
        }
        if !(self.edge_latency >= 0.0 && self.edge_latency < self.frame) {
            return bad("eps", "must satisfy 0 <= eps < T");
        }
        if self.antennas == 0 {
            return bad("N", "must be at least 1");
        }
        // K comes from the per-WS arrays; C is the reference length.
        let k = self.num_ws();
        if k == 0 {
            return bad("K", "must be at least 1");
        }
        for (name, v) in [
            ("C", &self.cycles_per_bit),
            ("phi", &self.capacitance),
            ("f_max", &self.f_max),
            ("R_min", &self.r_min),
        ] {
            if v.len() != k {
                return bad(name, &format!("expected {k} entries, got {}", v.len()));
            }
        }
        if self.cycles_per_bit.iter().any(|&c| !(c > 0.0)) {
            return bad("C", "entries must be positive");
        }
        if self.capacitance.iter().any(|&c| !(c > 0.0)) {
            return bad("phi", "entries must be positive");
        }
        if self.f_max.iter().any(|&c| !(c > 0.0)) {
            return bad("f_max", "entries must be positive");
        }
        if self.r_min.iter().any(|&c| !(c >= 0.0)) {
            return bad("R_min", "entries must be non-negative");
        }
        Ok(())
    }

    /// Builds parameters from a parsed config. Missing keys take the
    /// defaults of [`SystemParams::uniform`].
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        Self::from_kv_allowing(kv, &[])
    }

    /// As [`SystemParams::from_kv`], tolerating the listed extra keys.
    pub fn from_kv_allowing(kv: &KvConfig, extra: &[&str]) -> Result<Self> {
        const KNOWN: &[&str] = &[
            "eta",
            "T",
            "eps",
            "B",
            "sigma2",
            "sigma2_dbm",
            "P_max",
            "K",
            "N",
            "C",
            "phi",
            "f_max",
            "R_min",
        ];
        if let Some(unknown) = kv
            .keys()
            .find(|key| !KNOWN.contains(key) && !extra.contains(key))
        {
            return Err(Error::InvalidParam {
                name: unknown.to_string(),
                reason: "unknown key".into(),
            });
        }
        if kv.contains("sigma2") && kv.contains("sigma2_dbm") {
            return Err(Error::InvalidParam {
                name: "sigma2".into(),
                reason: "give either sigma2 or sigma2_dbm, not both".into(),
            });
        }

        let k = kv.count("K")?.unwrap_or(4);
        let n = kv.count("N")?.unwrap_or(4);
        let mut p = Self::uniform(k, n);
        if let Some(v) = kv.scalar("eta")? {
            p.eta = v;
        }
        if let Some(v) = kv.scalar("T")? {
            p.frame = v;
        }
        if let Some(v) = kv.scalar("eps")? {
            p.edge_latency = v;
        }
        if let Some(v) = kv.scalar("B")? {
            p.bandwidth = v;
        }
        if let Some(v) = kv.scalar("sigma2")? {
            p.noise = v;
        }
        if let Some(v) = kv.scalar("sigma2_dbm")? {
            p.noise = dbm_to_watts(v);
        }
        if let Some(v) = kv.scalar("P_max")? {
            p.p_max = v;
        }
        for (key, slot) in [
            ("C", &mut p.cycles_per_bit),
            ("phi", &mut p.capacitance),
            ("f_max", &mut p.f_max),
            ("R_min", &mut p.r_min),
        ] {
            if let Some(list) = kv.list(key)? {
                *slot = broadcast(key, list, k)?;
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv(&KvConfig::load(path)?)
    }
}

fn broadcast(key: &str, list: Vec<f64>, k: usize) -> Result<Vec<f64>> {
    match list.len() {
        1 => Ok(vec![list[0]; k]),
        n if n == k => Ok(list),
        n => Err(Error::InvalidParam {
            name: key.into(),
            reason: format!("expected 1 or {k} entries, got {n}"),
        }),
    }
}
