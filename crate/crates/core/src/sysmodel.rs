//! Harvesting, computing and offloading formulas in the substituted
//! variables `Pbar_k = P_k t_k` and `pbar_k = p_k t_k`, and the constraint
//! checker for the max-min problem.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::channel::{squared_norm, ChannelRealization};
use crate::error::{Error, Result};
use crate::params::SystemParams;

/// A decision point of the substituted problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// PS energy radiated during slot k, joules.
    pub ps_energy: Vec<f64>,
    /// Offloading slot lengths, seconds.
    pub slot: Vec<f64>,
    /// WS transmit energy, joules.
    pub tx_energy: Vec<f64>,
    /// CPU frequencies, Hz.
    pub freq: Vec<f64>,
    /// Max-min slack, bits.
    pub gamma: f64,
    /// PS energy radiated outside every offloading slot, joules. Only the
    /// full-local baseline uses it; every WS harvests from it.
    pub idle_charge: f64,
}

impl Allocation {
    pub fn zeros(k: usize) -> Self {
        Self {
            ps_energy: vec![0.0; k],
            slot: vec![0.0; k],
            tx_energy: vec![0.0; k],
            freq: vec![0.0; k],
            gamma: 0.0,
            idle_charge: 0.0,
        }
    }

    pub fn num_ws(&self) -> usize {
        self.slot.len()
    }
}

/// Energy harvested by WS `k` from the PS and, through recycling, from the
/// other WSs' uplink transmissions.
pub fn harvested_energy(
    alloc: &Allocation,
    chan: &ChannelRealization,
    params: &SystemParams,
    k: usize,
) -> f64 {
    let mut from_ps = alloc.idle_charge;
    let mut recycled = 0.0;
    for i in (0..alloc.num_ws()).filter(|&i| i != k) {
        from_ps += alloc.ps_energy[i];
        recycled += alloc.tx_energy[i] * chan.x_gain[i][k];
    }
    params.eta * (from_ps * chan.h_gain[k] + recycled)
}

/// Bits computed locally in one frame at frequency `f`.
pub fn local_bits(f: f64, k: usize, params: &SystemParams) -> Result<f64> {
    if !(f >= 0.0) {
        return Err(Error::Domain {
            func: "local_bits",
            value: f,
            expected: "f >= 0",
        });
    }
    Ok(params.frame * f / params.cycles_per_bit[k])
}

/// Energy spent computing locally at frequency `f` for the whole frame.
pub fn local_energy(f: f64, k: usize, params: &SystemParams) -> f64 {
    params.frame * params.capacitance[k] * f.powi(3)
}

/// `t B log2(1 + pbar·gain/(t σ²))`, extended by 0 at `t = 0`.
pub fn offload_bits(t: f64, pbar: f64, ap_gain: f64, params: &SystemParams) -> Result<f64> {
    if !(t >= 0.0) || !(pbar >= 0.0) {
        return Err(Error::Perspective { t, pbar });
    }
    if t == 0.0 {
        return if pbar == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::Perspective { t, pbar })
        };
    }
    let snr = pbar * ap_gain / (t * params.noise);
    Ok(t * params.bandwidth * snr.ln_1p() / LN_2)
}

pub fn total_bits(
    alloc: &Allocation,
    chan: &ChannelRealization,
    params: &SystemParams,
    k: usize,
) -> Result<f64> {
    Ok(local_bits(alloc.freq[k], k, params)?
        + offload_bits(alloc.slot[k], alloc.tx_energy[k], chan.ap_gain[k], params)?)
}

pub fn consumed_energy(alloc: &Allocation, params: &SystemParams, k: usize) -> f64 {
    local_energy(alloc.freq[k], k, params) + alloc.tx_energy[k]
}

/// Maximum-ratio combiner `g / ||g||`.
pub fn mrc_vector(g: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm = squared_norm(g).sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroChannel);
    }
    Ok(g.iter().map(|z| z / norm).collect())
}

/// `|w^H g|^2`, the post-combining power gain of beamformer `w`.
pub fn combining_gain(w: &[Complex64], g: &[Complex64]) -> f64 {
    w.iter()
        .zip(g)
        .map(|(wi, gi)| wi.conj() * gi)
        .sum::<Complex64>()
        .norm_sqr()
}

/// Signed residuals of every constraint (`<= 0` satisfied).
///
/// Each residual is compared against `tol` after division by the natural
/// scale of its constraint: `P_max·T` for PS energy, `T` for time, the
/// larger of harvested and consumed energy for causality and
/// non-negativity, `f_max` for frequency and `max(R_min, bits, 1)` for the
/// rate constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub ps_power: Vec<f64>,
    pub time_budget: f64,
    pub energy_causality: Vec<f64>,
    pub freq_cap: Vec<f64>,
    pub min_bits: Vec<f64>,
    pub fairness: Vec<f64>,
    pub nonneg_ps: Vec<f64>,
    pub nonneg_ws: Vec<f64>,
    /// Slots and frequencies inside their domains and no energy sent in an
    /// empty slot.
    pub domain_ok: bool,
    /// Largest scaled residual over every constraint.
    pub worst: f64,
    /// Name of the constraint attaining `worst`.
    pub worst_name: &'static str,
    pub feasible: bool,
}

pub fn check_feasibility(
    alloc: &Allocation,
    chan: &ChannelRealization,
    params: &SystemParams,
    tol: f64,
) -> ConstraintReport {
    let k = alloc.num_ws();
    let s = params.slot_budget();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_name = "none";
    let mut track = |scaled: f64, name: &'static str| {
        if scaled > worst || scaled.is_nan() {
            worst = if scaled.is_nan() {
                f64::INFINITY
            } else {
                scaled
            };
            worst_name = name;
        }
    };

    let mut domain_ok = alloc.idle_charge >= 0.0;
    let mut ps_power = Vec::with_capacity(k);
    let mut energy_causality = Vec::with_capacity(k);
    let mut freq_cap = Vec::with_capacity(k);
    let mut min_bits = Vec::with_capacity(k);
    let mut fairness = Vec::with_capacity(k);
    let mut nonneg_ps = Vec::with_capacity(k);
    let mut nonneg_ws = Vec::with_capacity(k);

    let time_budget = alloc.slot.iter().sum::<f64>() - s;
    track(time_budget / params.frame, "time budget");

    for i in 0..k {
        let (t, f) = (alloc.slot[i], alloc.freq[i]);
        if !(t >= 0.0) || !(f >= 0.0) || (t == 0.0 && alloc.tx_energy[i] != 0.0) {
            domain_ok = false;
        }

        let r = alloc.ps_energy[i] - params.p_max * t;
        track(r / (params.p_max * params.frame), "PS power");
        ps_power.push(r);

        let harvested = harvested_energy(alloc, chan, params, i);
        let consumed = consumed_energy(alloc, params, i);
        let e_scale = harvested.max(consumed).max(f64::MIN_POSITIVE);
        let r = consumed - harvested;
        track(r / e_scale, "energy causality");
        energy_causality.push(r);

        let r = f - params.f_max[i];
        track(r / params.f_max[i], "frequency cap");
        freq_cap.push(r);

        let bits = if t > 0.0 || alloc.tx_energy[i] == 0.0 {
            local_bits(f.max(0.0), i, params).unwrap_or(0.0)
                + offload_bits(
                    t.max(0.0),
                    alloc.tx_energy[i].max(0.0),
                    chan.ap_gain[i],
                    params,
                )
                .unwrap_or(0.0)
        } else {
            local_bits(f.max(0.0), i, params).unwrap_or(0.0)
        };
        let b_scale = params.r_min[i].max(bits).max(1.0);
        let r = params.r_min[i] - bits;
        track(r / b_scale, "minimum bits");
        min_bits.push(r);
        let r = alloc.gamma - bits;
        track(r / b_scale.max(alloc.gamma), "fairness slack");
        fairness.push(r);

        let ps_scale = (params.p_max * params.frame).max(f64::MIN_POSITIVE);
        let r = -alloc.ps_energy[i];
        track(r / ps_scale, "PS energy sign");
        nonneg_ps.push(r);
        let r = -alloc.tx_energy[i];
        track(r / e_scale, "WS energy sign");
        nonneg_ws.push(r);
    }

    ConstraintReport {
        ps_power,
        time_budget,
        energy_causality,
        freq_cap,
        min_bits,
        fairness,
        nonneg_ps,
        nonneg_ws,
        domain_ok,
        worst,
        worst_name,
        feasible: domain_ok && worst <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_ws() -> (ChannelRealization, SystemParams) {
        let chan = ChannelRealization::from_gains(
            vec![1e-6, 1e-6],
            vec![vec![0.0, 1e-4], vec![1e-4, 0.0]],
            vec![1e-6, 1e-6],
        )
        .unwrap();
        (chan, SystemParams::uniform(2, 1))
    }

    #[test]
    fn harvest_single_ws_is_zero() {
        let chan = ChannelRealization::from_gains(vec![1e-6], vec![vec![0.0]], vec![1e-6]).unwrap();
        let p = SystemParams::uniform(1, 1);
        let mut a = Allocation::zeros(1);
        a.slot[0] = 1.0;
        a.ps_energy[0] = 1.0;
        a.tx_energy[0] = 1e-6;
        assert_eq!(harvested_energy(&a, &chan, &p, 0), 0.0);
    }

    #[test]
    fn harvest_hand_value() {
        let (chan, p) = two_ws();
        let mut a = Allocation::zeros(2);
        a.ps_energy[1] = 0.25;
        a.tx_energy[1] = 1e-6;
        let e = harvested_energy(&a, &chan, &p, 0);
        assert!((e - 2.0008e-7).abs() < 1e-20);
        // PS-only part when nobody transmits
        a.tx_energy[1] = 0.0;
        assert!((harvested_energy(&a, &chan, &p, 0) - 0.8 * 0.25e-6).abs() < 1e-21);
    }

    #[test]
    fn local_formulas() {
        let p = SystemParams::uniform(1, 1);
        assert_eq!(local_bits(0.0, 0, &p).unwrap(), 0.0);
        assert_eq!(local_bits(1e6, 0, &p).unwrap(), 1000.0);
        assert_eq!(local_bits(2e6, 0, &p).unwrap(), 2000.0);
        assert!(local_bits(-1.0, 0, &p).is_err());
        assert_eq!(local_energy(0.0, 0, &p), 0.0);
        assert!((local_energy(1e6, 0, &p) - 1e-12).abs() < 1e-27);
        assert!((local_energy(2e6, 0, &p) / local_energy(1e6, 0, &p) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn offload_hand_value() {
        let p = SystemParams::uniform(1, 1);
        assert_eq!(offload_bits(0.0, 0.0, 1e-6, &p).unwrap(), 0.0);
        assert!(offload_bits(0.0, 1e-9, 1e-6, &p).is_err());
        let bits = offload_bits(0.25, 1e-6, 1e-6, &p).unwrap();
        let expect = 250.0 * 5f64.log2();
        assert!((bits - expect).abs() < 1e-9);
        assert!((bits - 580.482).abs() < 1e-3);
        let scaled = offload_bits(0.75, 3e-6, 1e-6, &p).unwrap();
        assert!((scaled - 3.0 * bits).abs() < 1e-9);
    }

    #[test]
    fn totals() {
        let (chan, p) = two_ws();
        let mut a = Allocation::zeros(2);
        assert_eq!(total_bits(&a, &chan, &p, 0).unwrap(), 0.0);
        assert_eq!(consumed_energy(&a, &p, 0), 0.0);
        a.freq[0] = 1e6;
        a.slot[0] = 0.25;
        a.tx_energy[0] = 1e-6;
        let bits = total_bits(&a, &chan, &p, 0).unwrap();
        assert!((bits - (1000.0 + 250.0 * 5f64.log2())).abs() < 1e-9);
        a.tx_energy[0] = 0.0;
        assert_eq!(consumed_energy(&a, &p, 0), local_energy(1e6, 0, &p));
    }

    #[test]
    fn mrc_basics() {
        let e1 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert_eq!(mrc_vector(&e1).unwrap(), e1);
        assert!(mrc_vector(&[Complex64::new(0.0, 0.0)]).is_err());
        let g = vec![Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5)];
        let w = mrc_vector(&g).unwrap();
        assert!((squared_norm(&w) - 1.0).abs() < 1e-15);
        assert!((combining_gain(&w, &g) - squared_norm(&g)).abs() < 1e-12);
    }

    #[test]
    fn zero_allocation_fails_min_bits() {
        let (chan, p) = two_ws();
        let rep = check_feasibility(&Allocation::zeros(2), &chan, &p, 1e-9);
        assert!(!rep.feasible);
        assert_eq!(rep.worst_name, "minimum bits");
    }

    #[test]
    fn full_time_budget_is_boundary() {
        let (chan, p) = two_ws();
        let mut a = Allocation::zeros(2);
        a.slot = vec![0.25, 0.75];
        let rep = check_feasibility(&a, &chan, &p, 1e-9);
        assert_eq!(rep.time_budget, 0.0);
    }

    #[test]
    fn feasible_point_passes() {
        let (chan, mut p) = two_ws();
        p.r_min = vec![0.0, 0.0];
        let mut a = Allocation::zeros(2);
        a.slot = vec![0.5, 0.5];
        a.ps_energy = vec![0.5, 0.5];
        a.tx_energy = vec![1e-7, 1e-7];
        a.freq = vec![1e5, 1e5];
        let bits0 = total_bits(&a, &chan, &p, 0).unwrap();
        let bits1 = total_bits(&a, &chan, &p, 1).unwrap();
        a.gamma = bits0.min(bits1);
        let rep = check_feasibility(&a, &chan, &p, 1e-9);
        assert!(rep.feasible, "{rep:?}");
        // slot without energy source
        a.tx_energy[0] = 1.0;
        assert!(!check_feasibility(&a, &chan, &p, 1e-9).feasible);
    }
}
