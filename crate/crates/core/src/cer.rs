//! Offloading-capacity gain from energy recycling in the equal-split,
//! full-offloading setting: every WS gets a `1/K` slot, the PS radiates a
//! constant `P0`, and each WS transmits everything it harvested. Rates are
//! per unit bandwidth.

use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{dbm_to_watts, KvConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GapScenario {
    /// Constant PS power, watts.
    pub p0: f64,
    /// WS transmit powers, watts.
    pub p: Vec<f64>,
    pub h_gain: Vec<f64>,
    pub x_gain: Vec<Vec<f64>>,
    /// `||g_k||^2`.
    pub ap_gain: Vec<f64>,
    pub eta: f64,
    pub sigma2: f64,
}

impl GapScenario {
    pub fn num_ws(&self) -> usize {
        self.p.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_ws();
        let bad = |name: &str, reason: &str| {
            Err(Error::InvalidParam {
                name: name.into(),
                reason: reason.into(),
            })
        };
        if k == 0 {
            return bad("K", "must be at least 1");
        }
        if self.h_gain.len() != k
            || self.ap_gain.len() != k
            || self.x_gain.len() != k
            || self.x_gain.iter().any(|r| r.len() != k)
        {
            return Err(Error::Dimension(format!(
                "gap scenario arrays disagree on K = {k}"
            )));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta", "must lie in (0, 1]");
        }
        if !(self.sigma2 > 0.0) {
            return bad("sigma2", "must be positive");
        }
        if !(self.p0 >= 0.0) {
            return bad("P0", "must be non-negative");
        }
        let all = self
            .p
            .iter()
            .chain(&self.h_gain)
            .chain(&self.ap_gain)
            .chain(self.x_gain.iter().flatten());
        for &v in all {
            if !(v >= 0.0) || !v.is_finite() {
                return bad("gains", "powers and gains must be finite and non-negative");
            }
        }
        Ok(())
    }

    fn share(&self) -> f64 {
        1.0 / self.num_ws() as f64
    }

    /// Energy from the PS alone: `sum_{i != k} eta P0 |h_k|^2 / K`.
    pub fn energy_without_er(&self, k: usize) -> f64 {
        let others = (self.num_ws() - 1) as f64;
        others * self.share() * self.eta * self.p0 * self.h_gain[k]
    }

    /// PS energy plus `sum_{i != k} eta p_i |g_{i,k}|^2 / K`.
    pub fn energy_with_er(&self, k: usize) -> f64 {
        self.energy_without_er(k) + self.share() * self.eta * self.recycled_power(k)
    }

    fn recycled_power(&self, k: usize) -> f64 {
        (0..self.num_ws())
            .filter(|&i| i != k)
            .map(|i| self.p[i] * self.x_gain[i][k])
            .sum()
    }

    fn rate(&self, k: usize, energy: f64) -> f64 {
        let kf = self.num_ws() as f64;
        self.share() * (kf * self.ap_gain[k] * energy / self.sigma2).ln_1p()
            / std::f64::consts::LN_2
    }

    /// Loads a scenario from the key-value format: `K`, `P0`, `p`, `h`,
    /// `g` (per-WS lists or one broadcast value), `x` (one value for every
    /// WS pair or `K*K` row-major entries, diagonal ignored), `eta` and
    /// `sigma2` or `sigma2_dbm`.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        const KNOWN: &[&str] = &["K", "P0", "p", "h", "g", "x", "eta", "sigma2", "sigma2_dbm"];
        if let Some(unknown) = kv.keys().find(|key| !KNOWN.contains(key)) {
            return Err(Error::InvalidParam {
                name: unknown.to_string(),
                reason: "unknown key".into(),
            });
        }
        let k = kv.count("K")?.ok_or_else(|| missing("K"))?;
        let list = |key: &str| -> Result<Vec<f64>> {
            let v = kv.list(key)?.ok_or_else(|| missing(key))?;
            match v.len() {
                1 => Ok(vec![v[0]; k]),
                n if n == k => Ok(v),
                n => Err(Error::InvalidParam {
                    name: key.into(),
                    reason: format!("expected 1 or {k} entries, got {n}"),
                }),
            }
        };
        let x_flat = kv.list("x")?.ok_or_else(|| missing("x"))?;
        let x_gain = match x_flat.len() {
            1 => (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| if i == j { 0.0 } else { x_flat[0] })
                        .collect()
                })
                .collect(),
            n if n == k * k => (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| if i == j { 0.0 } else { x_flat[i * k + j] })
                        .collect()
                })
                .collect(),
            n => {
                return Err(Error::InvalidParam {
                    name: "x".into(),
                    reason: format!("expected 1 or {} entries, got {n}", k * k),
                })
            }
        };
        let sigma2 = match (kv.scalar("sigma2")?, kv.scalar("sigma2_dbm")?) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidParam {
                    name: "sigma2".into(),
                    reason: "give either sigma2 or sigma2_dbm, not both".into(),
                })
            }
            (Some(w), None) => w,
            (None, Some(dbm)) => dbm_to_watts(dbm),
            (None, None) => dbm_to_watts(-90.0),
        };
        let s = Self {
            p0: kv.scalar("P0")?.unwrap_or(1.0),
            p: list("p")?,
            h_gain: list("h")?,
            x_gain,
            ap_gain: list("g")?,
            eta: kv.scalar("eta")?.unwrap_or(0.8),
            sigma2,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv(&KvConfig::load(path)?)
    }
}

fn missing(key: &str) -> Error {
    Error::InvalidParam {
        name: key.into(),
        reason: "required by the gap scenario".into(),
    }
}

pub fn rate_with_er(s: &GapScenario, k: usize) -> f64 {
    s.rate(k, s.energy_with_er(k))
}

pub fn rate_without_er(s: &GapScenario, k: usize) -> f64 {
    s.rate(k, s.energy_without_er(k))
}

pub fn capacity_gap_exact(s: &GapScenario, k: usize) -> f64 {
    let kf = s.num_ws() as f64;
    let with = s.sigma2 + kf * s.ap_gain[k] * s.energy_with_er(k);
    let without = s.sigma2 + kf * s.ap_gain[k] * s.energy_without_er(k);
    // One logarithm of the ratio keeps small gaps accurate.
    s.share() * ((with - without) / without).ln_1p() / std::f64::consts::LN_2
}

/// Noise-free limit `(1/K) log2(1 + sum p_i |g_ik|^2 / sum P0 |h_k|^2)`.
/// Infinite when WS `k` has no direct PS energy but does recycle.
pub fn capacity_gap_approx(s: &GapScenario, k: usize) -> f64 {
    let recycled = s.recycled_power(k);
    let direct = (s.num_ws() - 1) as f64 * s.p0 * s.h_gain[k];
    if recycled == 0.0 {
        return 0.0;
    }
    s.share() * (recycled / direct).ln_1p() / std::f64::consts::LN_2
}

/// One row per WS.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub ws: usize,
    pub energy_with_er: f64,
    pub energy_without_er: f64,
    pub rate_with_er: f64,
    pub rate_without_er: f64,
    pub gap_exact: f64,
    pub gap_approx: f64,
}

pub fn gap_table(s: &GapScenario) -> Result<Vec<GapRow>> {
    s.validate()?;
    Ok((0..s.num_ws())
        .map(|k| GapRow {
            ws: k,
            energy_with_er: s.energy_with_er(k),
            energy_without_er: s.energy_without_er(k),
            rate_with_er: rate_with_er(s, k),
            rate_without_er: rate_without_er(s, k),
            gap_exact: capacity_gap_exact(s, k),
            gap_approx: capacity_gap_approx(s, k),
        })
        .collect())
}

pub const GAP_HEADER: [&str; 7] = [
    "ws",
    "energy_with_er",
    "energy_without_er",
    "rate_with_er",
    "rate_without_er",
    "gap_exact",
    "gap_approx",
];

pub fn write_gap_csv<W: std::io::Write>(rows: &[GapRow], out: W) -> Result<()> {
    use crate::harness::fmt_num;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GAP_HEADER)?;
    for r in rows {
        w.write_record([
            r.ws.to_string(),
            fmt_num(r.energy_with_er),
            fmt_num(r.energy_without_er),
            fmt_num(r.rate_with_er),
            fmt_num(r.rate_without_er),
            fmt_num(r.gap_exact),
            fmt_num(r.gap_approx),
        ])?;
    }
    w.flush()?;
    Ok(())
}
