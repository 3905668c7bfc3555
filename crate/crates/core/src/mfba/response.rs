//! Per-WS best response to a slot length.
//!
//! With the time budget fully used and the PS at full power, WS `k` harvests
//! `ps_rate·(S - t_k) + extra` joules, where `ps_rate = η P_max |h_k|^2` and
//! `extra` collects recycled and idle-PS energy. It spends all of it, split
//! between local computing and offloading at a common energy price: the
//! frequency follows the closed-form frequency update and the transmit
//! energy the water-filling update. The resulting rate `R_k(t_k)` is concave
//! in `t_k`.

use std::f64::consts::LN_2;

use super::closed_form::{energy_from_prices, frequency_from_prices};
use crate::params::SystemParams;
use crate::specfun::rate_slope;

const BISECT_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub freq: f64,
    pub tx_energy: f64,
    /// Marginal bits per joule at the split.
    pub price: f64,
    pub bits: f64,
}

#[derive(Debug, Clone)]
pub struct WsModel {
    pub k: usize,
    frame: f64,
    cycles: f64,
    capacitance: f64,
    f_max: f64,
    bandwidth: f64,
    noise: f64,
    ap_gain: f64,
    budget: f64,
    ps_rate: f64,
    extra: f64,
    local: bool,
    params: SystemParams,
}

impl WsModel {
    pub fn new(
        params: &SystemParams,
        k: usize,
        h_gain: f64,
        ap_gain: f64,
        extra: f64,
        local: bool,
    ) -> Self {
        Self {
            k,
            frame: params.frame,
            cycles: params.cycles_per_bit[k],
            capacitance: params.capacitance[k],
            f_max: params.f_max[k],
            bandwidth: params.bandwidth,
            noise: params.noise,
            ap_gain,
            budget: params.slot_budget(),
            ps_rate: params.eta * params.p_max * h_gain,
            extra,
            local,
            params: params.clone(),
        }
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn energy_at(&self, slot: f64) -> f64 {
        (self.ps_rate * (self.budget - slot) + self.extra).max(0.0)
    }

    fn local_energy(&self, f: f64) -> f64 {
        self.frame * self.capacitance * f * f * f
    }

    fn offload_bits(&self, slot: f64, tx: f64) -> f64 {
        if slot <= 0.0 || tx <= 0.0 {
            return 0.0;
        }
        slot * self.bandwidth * (tx * self.ap_gain / (slot * self.noise)).ln_1p() / LN_2
    }

    fn offload_price(&self, slot: f64, tx: f64) -> f64 {
        self.bandwidth * self.ap_gain / (LN_2 * (self.noise + tx * self.ap_gain / slot))
    }

    fn local_price(&self, f: f64) -> f64 {
        1.0 / (3.0 * self.cycles * self.capacitance * f * f)
    }

    fn finish(&self, slot: f64, freq: f64, tx: f64, price: f64) -> Split {
        Split {
            freq,
            tx_energy: tx,
            price,
            bits: self.frame * freq / self.cycles + self.offload_bits(slot, tx),
        }
    }

    /// Best split of `energy` joules at slot length `slot`.
    pub fn split(&self, slot: f64, energy: f64) -> Split {
        let energy = energy.max(0.0);
        let can_offload = slot > 0.0;
        let zero_price = if can_offload {
            self.bandwidth * self.ap_gain / (LN_2 * self.noise)
        } else {
            f64::INFINITY
        };
        if energy == 0.0 {
            return self.finish(slot, 0.0, 0.0, zero_price);
        }
        if !self.local {
            let tx = if can_offload { energy } else { 0.0 };
            let price = if can_offload {
                self.offload_price(slot, tx)
            } else {
                0.0
            };
            return self.finish(slot, 0.0, tx, price);
        }
        let cube = |e: f64| (e / (self.frame * self.capacitance)).cbrt();
        if !can_offload {
            let f = cube(energy).min(self.f_max);
            let price = if f < self.f_max {
                self.local_price(f)
            } else {
                0.0
            };
            return self.finish(slot, f, 0.0, price);
        }

        // Common case: local computing saturates at f_max and the rest is
        // offloaded.
        let full_local = self.local_energy(self.f_max);
        if energy >= full_local {
            let tx = energy - full_local;
            let price = self.offload_price(slot, tx);
            if frequency_from_prices(1.0, price, 0.0, &self.params, self.k) >= self.f_max {
                return self.finish(slot, self.f_max, tx, price);
            }
        }

        // Local-only when offloading is not worth its first joule.
        let f_all = cube(energy).min(self.f_max);
        if f_all < self.f_max && self.local_price(f_all) >= zero_price {
            return self.finish(slot, f_all, 0.0, self.local_price(f_all));
        }

        // Interior: bisect the energy price so both updates exhaust `energy`.
        let spend = |price: f64| {
            let f = frequency_from_prices(1.0, price, 0.0, &self.params, self.k);
            self.local_energy(f) + energy_from_prices(slot, self.ap_gain, 1.0, price, &self.params)
        };
        let mut hi = zero_price;
        let mut lo = slot * self.bandwidth / (LN_2 * (energy + slot * self.noise / self.ap_gain));
        lo = lo.min(hi);
        for _ in 0..BISECT_ITERS {
            let mid = (lo * hi).sqrt();
            if spend(mid) > energy {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let price = hi;
        let f = frequency_from_prices(1.0, price, 0.0, &self.params, self.k);
        let tx = (energy - self.local_energy(f)).max(0.0);
        self.finish(slot, f, tx, price)
    }

    /// Best response at slot length `slot`.
    pub fn respond(&self, slot: f64) -> Split {
        self.split(slot, self.energy_at(slot))
    }

    pub fn rate(&self, slot: f64) -> f64 {
        self.respond(slot).bits
    }

    /// `dR/dt`: the marginal rate of time `B·F(SNR)` minus the value of the
    /// PS energy the WS forgoes while it transmits.
    pub fn slope(&self, slot: f64) -> f64 {
        if slot <= 0.0 {
            let near = self.respond(1e-12 * self.budget);
            if near.tx_energy > 0.0 {
                return f64::INFINITY;
            }
            let price = if near.price.is_finite() {
                near.price
            } else {
                0.0
            };
            return -price * self.ps_rate;
        }
        let s = self.respond(slot);
        let snr = s.tx_energy * self.ap_gain / (slot * self.noise);
        let time_value = self.bandwidth * rate_slope(snr).unwrap_or(0.0);
        let price = if s.price.is_finite() { s.price } else { 0.0 };
        time_value - price * self.ps_rate
    }

    /// Slot length maximizing `R_k` on `[0, S]` and the rate there.
    pub fn peak(&self) -> (f64, f64) {
        let s = self.budget;
        if self.slope(s) >= 0.0 {
            return (s, self.rate(s));
        }
        let (mut lo, mut hi) = (0.0, s);
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if self.slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * s {
                break;
            }
        }
        [lo, hi]
            .into_iter()
            .map(|t| (t, self.rate(t)))
            .fold(
                (0.0, f64::NEG_INFINITY),
                |a, b| if b.1 > a.1 { b } else { a },
            )
    }

    /// Smallest slot in `[0, peak]` reaching `level` bits.
    pub fn slot_for_level(&self, level: f64, peak: (f64, f64)) -> Option<f64> {
        if self.rate(0.0) >= level {
            return Some(0.0);
        }
        if peak.1 < level {
            return None;
        }
        let (mut lo, mut hi) = (0.0, peak.0);
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if self.rate(mid) >= level {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * self.budget {
                break;
            }
        }
        Some(hi)
    }

    /// Largest slot in `[peak, S]` still reaching `level` bits.
    pub fn last_slot_for_level(&self, level: f64, peak: (f64, f64)) -> Option<f64> {
        if peak.1 < level {
            return None;
        }
        if self.rate(self.budget) >= level {
            return Some(self.budget);
        }
        let (mut lo, mut hi) = (peak.0, self.budget);
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if self.rate(mid) >= level {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * self.budget {
                break;
            }
        }
        Some(lo)
    }

    /// Slot in `[lo, hi]` where the slope equals `price` (clamped).
    pub fn slot_for_price(&self, price: f64, lo: f64, hi: f64) -> f64 {
        if self.slope(lo) <= price {
            return lo;
        }
        if self.slope(hi) >= price {
            return hi;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (a + b);
            if self.slope(mid) > price {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-15 * self.budget {
                break;
            }
        }
        0.5 * (a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(local: bool) -> WsModel {
        let p = SystemParams::uniform(2, 4);
        WsModel::new(&p, 0, 6e-6, 2.4e-5, 0.0, local)
    }

    #[test]
    fn split_exhausts_energy() {
        let m = model(true);
        for &(t, e) in &[(0.3, 3e-6), (0.7, 1e-13), (0.5, 5e-13), (0.2, 1e-11)] {
            let s = m.split(t, e);
            let used = m.local_energy(s.freq) + s.tx_energy;
            assert!((used - e).abs() <= 1e-12 * e, "t={t} e={e}: {s:?}");
            assert!(s.freq <= 1e6);
        }
    }

    #[test]
    fn split_beats_neighbours() {
        // The chosen split is a local maximum along the energy line.
        let m = model(true);
        for &(t, e) in &[(0.3, 2e-12), (0.5, 1.2e-12), (0.1, 5e-13)] {
            let s = m.split(t, e);
            for delta in [-1e-3, 1e-3] {
                let f = (s.freq * (1.0 + delta)).min(1e6);
                let tx = e - m.local_energy(f);
                if tx < 0.0 {
                    continue;
                }
                let bits = m.frame * f / m.cycles + m.offload_bits(t, tx);
                assert!(bits <= s.bits * (1.0 + 1e-12), "t={t} e={e}");
            }
        }
    }

    #[test]
    fn offload_only_model() {
        let m = model(false);
        let s = m.split(0.4, 1e-6);
        assert_eq!(s.freq, 0.0);
        assert_eq!(s.tx_energy, 1e-6);
    }

    #[test]
    fn slope_matches_finite_difference() {
        let m = model(true);
        for &t in &[0.05, 0.3, 0.6, 0.95] {
            let h = 1e-6;
            let fd = (m.rate(t + h) - m.rate(t - h)) / (2.0 * h);
            let an = m.slope(t);
            assert!(
                (fd - an).abs() <= 1e-5 * an.abs().max(1.0),
                "t={t}: {fd} vs {an}"
            );
        }
    }

    #[test]
    fn level_search_brackets_peak() {
        let m = model(true);
        let pk = m.peak();
        assert!(pk.0 > 0.0 && pk.0 <= 1.0);
        let level = 0.5 * (m.rate(0.0) + pk.1);
        let lo = m.slot_for_level(level, pk).unwrap();
        assert!((m.rate(lo) - level).abs() <= 1e-9 * level);
        let hi = m.last_slot_for_level(level, pk).unwrap();
        assert!(hi >= lo);
        assert!(m.slot_for_level(pk.1 * 1.01, pk).is_none());
    }
}
