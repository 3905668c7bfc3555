//! Closed-form primal updates at given Lagrange multipliers.
//!
//! The `*_from_prices` kernels take the handful of scalars each update
//! actually depends on and are what the solver calls in its inner loops;
//! the `optimal_*` functions read the same quantities out of a
//! [`DualState`].

use std::f64::consts::LN_2;

use crate::params::SystemParams;
use crate::specfun::rate_slope_inv;

/// Multipliers of the two block subproblems.
///
/// `lambda*` belong to the (slot, frequency) block: PS power (1), time
/// budget (2), energy causality (3), frequency cap (4), minimum bits (5) and
/// fairness slack (6). `eps*` belong to the (energy) block: PS power (1),
/// energy causality (2), minimum bits (3), PS energy sign (4), WS energy
/// sign (5) and fairness slack (6).
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub lambda1: Vec<f64>,
    pub lambda2: f64,
    pub lambda3: Vec<f64>,
    pub lambda4: Vec<f64>,
    pub lambda5: Vec<f64>,
    pub lambda6: Vec<f64>,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    pub eps3: Vec<f64>,
    pub eps4: Vec<f64>,
    pub eps5: Vec<f64>,
    pub eps6: Vec<f64>,
    /// Energy value a WS's transmission returns to its peers through
    /// recycling, `eta * sum_{j != k} eps2_j |g_{k,j}|^2`. It lowers the net
    /// price of transmit energy in [`optimal_ws_energy`]; zero without
    /// recycling.
    pub recycle_credit: Vec<f64>,
}

impl DualState {
    /// All multipliers at one, recycling credit at zero.
    pub fn ones(k: usize) -> Self {
        let one = vec![1.0; k];
        Self {
            lambda1: one.clone(),
            lambda2: 1.0,
            lambda3: one.clone(),
            lambda4: one.clone(),
            lambda5: one.clone(),
            lambda6: one.clone(),
            eps1: one.clone(),
            eps2: one.clone(),
            eps3: one.clone(),
            eps4: one.clone(),
            eps5: one.clone(),
            eps6: one,
            recycle_credit: vec![0.0; k],
        }
    }

    pub fn num_ws(&self) -> usize {
        self.lambda1.len()
    }

    /// Clamps every multiplier to be non-negative.
    pub fn project(&mut self) {
        self.lambda2 = self.lambda2.max(0.0);
        for v in [
            &mut self.lambda1,
            &mut self.lambda3,
            &mut self.lambda4,
            &mut self.lambda5,
            &mut self.lambda6,
            &mut self.eps1,
            &mut self.eps2,
            &mut self.eps3,
            &mut self.eps4,
            &mut self.eps5,
            &mut self.eps6,
        ] {
            v.iter_mut().for_each(|x| *x = x.max(0.0));
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.lambda2 >= 0.0
            && [
                &self.lambda1,
                &self.lambda3,
                &self.lambda4,
                &self.lambda5,
                &self.lambda6,
                &self.eps1,
                &self.eps2,
                &self.eps3,
                &self.eps4,
                &self.eps5,
                &self.eps6,
            ]
            .iter()
            .all(|v| v.iter().all(|&x| x >= 0.0))
    }
}

/// Slot length at which the marginal rate of time `B·F(SNR)`, weighted by
/// `weight`, equals the net time price. `None` when the price or the weight
/// is not positive: the slot is then limited by the time budget alone.
pub fn slot_from_prices(
    tx_energy: f64,
    ap_gain: f64,
    net_time_price: f64,
    weight: f64,
    params: &SystemParams,
) -> Option<f64> {
    if tx_energy == 0.0 {
        return Some(0.0);
    }
    if !(weight > 0.0) || !(net_time_price > 0.0) {
        return None;
    }
    let snr = rate_slope_inv(net_time_price / (weight * params.bandwidth)).ok()?;
    Some(tx_energy * ap_gain / (params.noise * snr))
}

/// `t_k = pbar_k ||g_k||^2 / (σ² F^{-1}((λ2 - λ1 P_max) / ((λ5 + λ6) B)))`.
pub fn optimal_time(
    tx_energy: f64,
    ap_gain: f64,
    duals: &DualState,
    params: &SystemParams,
    k: usize,
) -> Option<f64> {
    slot_from_prices(
        tx_energy,
        ap_gain,
        duals.lambda2 - duals.lambda1[k] * params.p_max,
        duals.lambda5[k] + duals.lambda6[k],
        params,
    )
}

/// CPU frequency balancing the weighted local rate against the energy price
/// and the frequency-cap price, capped at `f_max`.
pub fn frequency_from_prices(
    weight: f64,
    energy_price: f64,
    cap_price: f64,
    params: &SystemParams,
    k: usize,
) -> f64 {
    let f_max = params.f_max[k];
    if energy_price <= 0.0 {
        return f_max;
    }
    let num = weight * params.frame / params.cycles_per_bit[k] - cap_price;
    if num <= 0.0 {
        return 0.0;
    }
    (num / (3.0 * energy_price * params.frame * params.capacitance[k]))
        .sqrt()
        .min(f_max)
}

/// `f_k = min(f_max, sqrt(((λ5 + λ6) T / C_k - λ4) / (3 λ3 T φ_k)))`.
pub fn optimal_frequency(duals: &DualState, params: &SystemParams, k: usize) -> f64 {
    frequency_from_prices(
        duals.lambda5[k] + duals.lambda6[k],
        duals.lambda3[k],
        duals.lambda4[k],
        params,
        k,
    )
}

/// Water-filling transmit energy: `t [weight B / (ln2 · price) - σ²/g]^+`.
pub fn energy_from_prices(
    slot: f64,
    ap_gain: f64,
    weight: f64,
    net_energy_price: f64,
    params: &SystemParams,
) -> f64 {
    if !(net_energy_price > 0.0) || slot <= 0.0 {
        return 0.0;
    }
    let level = weight * params.bandwidth / (LN_2 * net_energy_price);
    (slot * (level - params.noise / ap_gain)).max(0.0)
}

/// `pbar_k = t_k [(ε3 + ε6) B / (ln2 (ε2 - ε5 - credit)) - σ²/||g_k||^2]^+`;
/// zero when the net price is not positive.
pub fn optimal_ws_energy(
    slot: f64,
    ap_gain: f64,
    duals: &DualState,
    params: &SystemParams,
    k: usize,
) -> f64 {
    energy_from_prices(
        slot,
        ap_gain,
        duals.eps3[k] + duals.eps6[k],
        duals.eps2[k] - duals.eps5[k] - duals.recycle_credit[k],
        params,
    )
}

/// The PS always radiates at full power inside a slot.
pub fn optimal_ps_energy(slot: f64, params: &SystemParams) -> f64 {
    (params.p_max * slot).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::rate_slope;

    fn params() -> SystemParams {
        SystemParams::uniform(1, 1)
    }

    #[test]
    fn slot_zero_energy_gives_zero() {
        let d = DualState::ones(1);
        assert_eq!(optimal_time(0.0, 1e-6, &d, &params(), 0), Some(0.0));
    }

    #[test]
    fn slot_is_linear_in_energy() {
        let mut d = DualState::ones(1);
        d.lambda2 = 3000.0;
        d.lambda1[0] = 0.0;
        let p = params();
        let a = optimal_time(1e-6, 1e-5, &d, &p, 0).unwrap();
        let b = optimal_time(2e-6, 1e-5, &d, &p, 0).unwrap();
        assert!((b - 2.0 * a).abs() <= 1e-14 * b);
    }

    #[test]
    fn slot_at_unit_snr() {
        let p = params();
        let mut d = DualState::ones(1);
        d.lambda1[0] = 0.0;
        d.lambda5[0] = 0.5;
        d.lambda6[0] = 0.5;
        d.lambda2 = rate_slope(1.0).unwrap() * p.bandwidth;
        let (pbar, g) = (3e-7, 2e-5);
        let t = optimal_time(pbar, g, &d, &p, 0).unwrap();
        assert!((t - pbar * g / p.noise).abs() <= 1e-9 * t);
    }

    #[test]
    fn slot_unbounded_price() {
        let p = params();
        let mut d = DualState::ones(1);
        d.lambda2 = 0.5; // below lambda1 * P_max
        assert_eq!(optimal_time(1e-6, 1e-5, &d, &p, 0), None);
        d.lambda2 = 10.0;
        d.lambda5[0] = 0.0;
        d.lambda6[0] = 0.0;
        assert_eq!(optimal_time(1e-6, 1e-5, &d, &p, 0), None);
    }

    #[test]
    fn frequency_cases() {
        let mut p = params();
        p.f_max[0] = 1e12;
        let mut d = DualState::ones(1);
        d.lambda4[0] = 0.0;
        d.lambda5[0] = 0.0;
        // numerator (λ5+λ6)T/C equals 3 λ3 T φ  ->  1 Hz
        d.lambda6[0] = 3.0 * p.capacitance[0] * p.cycles_per_bit[0];
        d.lambda3[0] = 1.0;
        assert!((optimal_frequency(&d, &p, 0) - 1.0).abs() < 1e-12);
        // negative numerator clamps to zero
        d.lambda4[0] = 1.0;
        assert_eq!(optimal_frequency(&d, &p, 0), 0.0);
        // zero energy price computes at the cap
        d.lambda4[0] = 0.0;
        d.lambda3[0] = 0.0;
        assert_eq!(optimal_frequency(&d, &p, 0), 1e12);
        // growing energy price drives the frequency to zero
        d.lambda3[0] = 1e30;
        assert!(optimal_frequency(&d, &p, 0) < 1e-12);
        // the cap binds
        p.f_max[0] = 0.5;
        d.lambda3[0] = 1.0;
        assert_eq!(optimal_frequency(&d, &p, 0), 0.5);
    }

    #[test]
    fn ws_energy_cases() {
        let p = params();
        let g = 1e-6;
        let mut d = DualState::ones(1);
        d.eps5[0] = 0.0;
        assert_eq!(optimal_ws_energy(0.0, g, &d, &p, 0), 0.0);
        // water level (ε3+ε6) B / (ln2 Δ) set to 2σ²/g
        d.eps3[0] = 0.0;
        d.eps6[0] = 1.0;
        d.eps2[0] = p.bandwidth * g / (LN_2 * 2.0 * p.noise);
        let e = optimal_ws_energy(0.5, g, &d, &p, 0);
        let expect = 0.5 * p.noise / g;
        assert!((e - expect).abs() <= 1e-12 * expect);
        // level below the inverse gain is clamped
        d.eps2[0] *= 4.0;
        assert_eq!(optimal_ws_energy(0.5, g, &d, &p, 0), 0.0);
        // inactive when the WS-energy sign multiplier dominates
        d.eps5[0] = d.eps2[0];
        assert_eq!(optimal_ws_energy(0.5, g, &d, &p, 0), 0.0);
    }

    #[test]
    fn ps_energy_is_full_power() {
        let p = params();
        assert_eq!(optimal_ps_energy(0.0, &p), 0.0);
        assert_eq!(optimal_ps_energy(0.25, &p), 0.25);
        assert_eq!(optimal_ps_energy(p.frame, &p), p.p_max * p.frame);
    }

    #[test]
    fn projection_clamps() {
        let mut d = DualState::ones(2);
        d.lambda2 = -1.0;
        d.eps5[1] = -3.0;
        assert!(!d.is_nonnegative());
        d.project();
        assert!(d.is_nonnegative());
        assert_eq!(d.lambda2, 0.0);
    }
}
