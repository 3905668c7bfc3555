//! Alternating optimization shared by MFBA and the model-based baselines.
//!
//! Step 1 picks the slot lengths with the PS energy tied to the slots and the
//! recycled energy frozen at the previous iterate. Every WS then sees a
//! concave rate curve `R_k(t_k)` (see [`WsModel`]); the max-min objective
//! is a water level on those curves and the sum objective a common time
//! price. Step 2 spends each WS's harvested energy, recycling included, by a
//! Jacobi fixed point. Step 3 evaluates the rates.

use super::response::WsModel;
use super::{SolveReport, SolveStatus, SolverConfig};
use crate::channel::ChannelRealization;
use crate::error::Result;
use crate::params::SystemParams;
use crate::sysmodel::{harvested_energy, local_energy, Allocation};

const BISECT_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    MaxMin,
    SumRate,
}

/// What a scheme optimizes and which resources it may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeSpec {
    pub name: &'static str,
    pub objective: Objective,
    pub local: bool,
    pub recycling: bool,
}

impl SchemeSpec {
    pub const MFBA: Self = Self {
        name: "MFBA",
        objective: Objective::MaxMin,
        local: true,
        recycling: true,
    };
    pub const ZFBA: Self = Self {
        name: "ZFBA",
        objective: Objective::SumRate,
        local: true,
        recycling: true,
    };
    pub const FCOA: Self = Self {
        name: "FCOA",
        objective: Objective::MaxMin,
        local: false,
        recycling: true,
    };
    pub const NERA: Self = Self {
        name: "NERA",
        objective: Objective::MaxMin,
        local: true,
        recycling: false,
    };
}

struct Curves {
    models: Vec<WsModel>,
    peaks: Vec<(f64, f64)>,
}

impl Curves {
    fn new(
        chan: &ChannelRealization,
        params: &SystemParams,
        recycled: &[f64],
        local: bool,
    ) -> Self {
        let models: Vec<WsModel> = (0..chan.num_ws())
            .map(|k| {
                WsModel::new(
                    params,
                    k,
                    chan.h_gain[k],
                    chan.ap_gain[k],
                    recycled[k],
                    local,
                )
            })
            .collect();
        let peaks = models.iter().map(WsModel::peak).collect();
        Self { models, peaks }
    }

    /// Slot intervals on which every WS reaches its level, if they admit a
    /// point of the time simplex.
    fn intervals(&self, levels: &[f64], budget: f64) -> Option<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(levels.len());
        for ((m, &pk), &lvl) in self.models.iter().zip(&self.peaks).zip(levels) {
            let lo = m.slot_for_level(lvl, pk)?;
            let hi = m.last_slot_for_level(lvl, pk)?;
            out.push((lo, hi));
        }
        let lo_sum: f64 = out.iter().map(|r| r.0).sum();
        let hi_sum: f64 = out.iter().map(|r| r.1).sum();
        (lo_sum <= budget && hi_sum >= budget * (1.0 - 1e-12)).then_some(out)
    }

    /// Max-min water level. `None` when the floors cannot all be met.
    fn max_min_slots(&self, floors: &[f64], budget: f64) -> Option<Vec<f64>> {
        let levels = |g: f64| floors.iter().map(|&f| f.max(g)).collect::<Vec<_>>();
        let mut best = self.intervals(&levels(0.0), budget)?;
        let (mut lo, mut hi) = (
            0.0,
            self.peaks.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        );
        if let Some(r) = self.intervals(&levels(hi), budget) {
            best = r;
        } else {
            for _ in 0..BISECT_ITERS {
                let mid = 0.5 * (lo + hi);
                match self.intervals(&levels(mid), budget) {
                    Some(r) => {
                        lo = mid;
                        best = r;
                    }
                    None => hi = mid,
                }
                if hi - lo <= 1e-14 * hi {
                    break;
                }
            }
        }
        // Among the slot vectors holding the water level, take the one with
        // the largest total.
        Some(self.sum_rate_within(&best, budget))
    }

    /// Sum-rate slots: equal marginal rate of time across WSs, within the
    /// intervals that keep every WS above its floor.
    fn sum_rate_slots(&self, floors: &[f64], budget: f64) -> Option<Vec<f64>> {
        let ranges = self.intervals(floors, budget)?;
        Some(self.sum_rate_within(&ranges, budget))
    }

    fn sum_rate_within(&self, ranges: &[(f64, f64)], budget: f64) -> Vec<f64> {
        let at = |price: f64| -> Vec<f64> {
            self.models
                .iter()
                .zip(ranges)
                .map(|(m, r)| m.slot_for_price(price, r.0, r.1))
                .collect()
        };
        let probe = |r: &(f64, f64)| r.0.max(1e-12 * budget);
        let mut hi = self
            .models
            .iter()
            .zip(ranges)
            .map(|(m, r)| m.slope(probe(r)))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut lo = self
            .models
            .iter()
            .zip(ranges)
            .map(|(m, r)| m.slope(r.1))
            .fold(f64::INFINITY, f64::min);
        let span = (hi - lo).abs().max(1.0);
        hi += span;
        lo -= span;
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if at(mid).iter().sum::<f64>() > budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * span {
                break;
            }
        }
        // Hand the bisection remainder to WSs that still have room.
        let mut t = at(hi);
        let mut spare = budget - t.iter().sum::<f64>();
        for k in 0..t.len() {
            if spare <= 0.0 {
                break;
            }
            let add = (ranges[k].1 - t[k]).max(0.0).min(spare);
            t[k] += add;
            spare -= add;
        }
        trim_to_budget(&mut t, budget);
        t
    }
}

fn trim_to_budget(t: &mut [f64], budget: f64) {
    let excess = t.iter().sum::<f64>() - budget;
    if excess > 0.0 {
        if let Some(k) = (0..t.len()).max_by(|&a, &b| t[a].total_cmp(&t[b])) {
            t[k] = (t[k] - excess).max(0.0);
        }
    }
}

/// Spends all harvested energy at the given slots. Starting from zero
/// transmit energy the iterates only grow, so every WS's spending stays
/// covered by what the current iterate actually delivers.
pub(crate) fn spend_all(
    slots: &[f64],
    chan: &ChannelRealization,
    params: &SystemParams,
    local: bool,
    max_iters: usize,
) -> Allocation {
    let n = slots.len();
    let models: Vec<WsModel> = (0..n)
        .map(|k| WsModel::new(params, k, chan.h_gain[k], chan.ap_gain[k], 0.0, local))
        .collect();
    let mut alloc = Allocation::zeros(n);
    alloc.slot = slots.to_vec();
    alloc.ps_energy = slots.iter().map(|t| params.p_max * t).collect();
    for _ in 0..max_iters.max(1) {
        let mut next = alloc.clone();
        for k in 0..n {
            let s = models[k].split(slots[k], harvested_energy(&alloc, chan, params, k));
            next.freq[k] = s.freq;
            next.tx_energy[k] = if slots[k] > 0.0 { s.tx_energy } else { 0.0 };
        }
        let moved = next
            .tx_energy
            .iter()
            .zip(&alloc.tx_energy)
            .any(|(a, b)| (a - b).abs() > 1e-15 * a.abs());
        alloc = next;
        if !moved {
            break;
        }
    }
    // The last sweep used the previous (smaller) recycling; trim any
    // rounding excess so causality holds exactly.
    for k in 0..n {
        let budget = harvested_energy(&alloc, chan, params, k);
        let over = local_energy(alloc.freq[k], k, params) + alloc.tx_energy[k] - budget;
        if over > 0.0 {
            alloc.tx_energy[k] = (alloc.tx_energy[k] - over).max(0.0);
            let left = budget - alloc.tx_energy[k];
            if local_energy(alloc.freq[k], k, params) > left {
                alloc.freq[k] = (left.max(0.0) / (params.frame * params.capacitance[k])).cbrt();
            }
        }
    }
    alloc
}

fn recycled(alloc: &Allocation, chan: &ChannelRealization, params: &SystemParams) -> Vec<f64> {
    (0..alloc.num_ws())
        .map(|k| {
            (0..alloc.num_ws())
                .filter(|&i| i != k)
                .map(|i| params.eta * alloc.tx_energy[i] * chan.x_gain[i][k])
                .sum()
        })
        .collect()
}

fn objective_value(bits: &[f64], objective: Objective) -> f64 {
    match objective {
        Objective::MaxMin => bits.iter().copied().fold(f64::INFINITY, f64::min),
        Objective::SumRate => bits.iter().sum(),
    }
}

/// Feasible starting point: equal slots, half-speed CPUs (slowed further if
/// the initial harvest cannot pay for them) and no transmission.
pub(crate) fn initial_allocation(
    chan: &ChannelRealization,
    params: &SystemParams,
    local: bool,
) -> Allocation {
    let n = chan.num_ws();
    let mut alloc = Allocation::zeros(n);
    let s = params.slot_budget();
    alloc.slot = vec![s / n as f64; n];
    alloc.ps_energy = alloc.slot.iter().map(|t| params.p_max * t).collect();
    for k in 0..n {
        if !local {
            continue;
        }
        let e = harvested_energy(&alloc, chan, params, k);
        let cap = (e / (params.frame * params.capacitance[k])).cbrt();
        alloc.freq[k] = (0.5 * params.f_max[k]).min(cap);
    }
    alloc
}

pub(crate) fn run(
    chan: &ChannelRealization,
    params: &SystemParams,
    config: &SolverConfig,
    scheme: SchemeSpec,
) -> Result<SolveReport> {
    params.validate()?;
    config.validate()?;
    let stripped;
    let chan = if scheme.recycling {
        chan
    } else {
        stripped = chan.without_recycling();
        &stripped
    };
    let n = chan.num_ws();
    let budget = params.slot_budget();

    let mut alloc = initial_allocation(chan, params, scheme.local);
    let mut bits = super::bits_of(&alloc, chan, params)?;
    let mut value = objective_value(&bits, scheme.objective);
    let mut trace = vec![value];

    let floors = params.r_min.clone();
    let zero_floors = vec![0.0; n];
    let mut infeasible = false;
    let mut converged = false;
    let mut iters = 0;

    for it in 1..=config.max_outer_iters {
        iters = it;
        let curves = Curves::new(chan, params, &recycled(&alloc, chan, params), scheme.local);
        let pick = |fl: &[f64]| match scheme.objective {
            Objective::MaxMin => curves.max_min_slots(fl, budget),
            Objective::SumRate => curves.sum_rate_slots(fl, budget),
        };
        let slots = match pick(if infeasible { &zero_floors } else { &floors }) {
            Some(t) => t,
            None if !infeasible => {
                // The floors are out of reach: fall back to the best effort
                // without them and report the instance as infeasible.
                infeasible = true;
                match pick(&zero_floors) {
                    Some(t) => t,
                    None => break,
                }
            }
            None => break,
        };
        let cand = spend_all(&slots, chan, params, scheme.local, config.max_dual_iters);
        let cand_bits = super::bits_of(&cand, chan, params)?;
        let cand_value = objective_value(&cand_bits, scheme.objective);

        if it > 1 && cand_value < value {
            // Freezing the recycled energy can cost a sliver once the slots
            // have settled; keep the better iterate and stop.
            converged = (value - cand_value) <= config.tol_gamma.sqrt() * value.abs().max(1.0);
            break;
        }
        let change = (cand_value - value).abs() / value.abs().max(1.0);
        alloc = cand;
        bits = cand_bits;
        value = cand_value;
        trace.push(value);
        if it > 1 && change < config.tol_gamma {
            converged = true;
            break;
        }
    }

    alloc.gamma = bits.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    if n == 0 {
        alloc.gamma = 0.0;
    }
    let status = if infeasible {
        SolveStatus::Infeasible
    } else if converged {
        SolveStatus::Converged
    } else {
        SolveStatus::NotConverged
    };
    super::finish_report(scheme, alloc, chan, params, config, iters, status, trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chan2() -> ChannelRealization {
        ChannelRealization::from_gains(
            vec![6e-6, 4e-6],
            vec![vec![0.0, 1e-4], vec![1e-4, 0.0]],
            vec![2.4e-5, 1.2e-5],
        )
        .unwrap()
    }

    #[test]
    fn spend_all_exhausts_energy() {
        let p = SystemParams::uniform(2, 1);
        let c = chan2();
        let a = spend_all(&[0.4, 0.6], &c, &p, true, 200);
        for k in 0..2 {
            let h = harvested_energy(&a, &c, &p, k);
            let used = local_energy(a.freq[k], k, &p) + a.tx_energy[k];
            assert!(used <= h);
            assert!(h - used <= 1e-12 * h, "k={k}: {h} vs {used}");
        }
    }

    #[test]
    fn max_min_levels_equalize() {
        let p = SystemParams::uniform(2, 1);
        let c = chan2();
        let curves = Curves::new(&c, &p, &[0.0, 0.0], true);
        let t = curves.max_min_slots(&[0.0, 0.0], 1.0).unwrap();
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let r: Vec<f64> = (0..2).map(|k| curves.models[k].rate(t[k])).collect();
        assert!((r[0] - r[1]).abs() <= 1e-9 * r[0], "{r:?}");
    }

    #[test]
    fn sum_rate_beats_max_min_total() {
        let p = SystemParams::uniform(2, 1);
        let c = chan2();
        let curves = Curves::new(&c, &p, &[0.0, 0.0], true);
        let total = |t: &[f64]| -> f64 { (0..2).map(|k| curves.models[k].rate(t[k])).sum() };
        let a = curves.max_min_slots(&[0.0, 0.0], 1.0).unwrap();
        let b = curves.sum_rate_slots(&[0.0, 0.0], 1.0).unwrap();
        assert!(total(&b) >= total(&a) * (1.0 - 1e-12));
        for step in [-1e-3, 1e-3] {
            let c = [b[0] + step, b[1] - step];
            assert!(total(&c) <= total(&b) * (1.0 + 1e-12));
        }
    }
}
