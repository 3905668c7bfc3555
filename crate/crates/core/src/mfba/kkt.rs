//! Multiplier recovery from a primal solution.
//!
//! With the PS energy eliminated (`Pbar = P_max t`) the stationarity
//! conditions are linear in the objective weights `w`, the energy prices
//! `mu` and the time price `lambda2`:
//!
//! ```text
//! slot k:      w_k B F(x_k) + P_max eta sum_{j != k} mu_j h_j - lambda2 = 0
//! energy k:    w_k B g_k / (ln2 sigma2 (1 + x_k)) - mu_k + eta sum_{j != k} mu_j x_kj = 0
//! frequency k: w_k T / C_k - 3 mu_k T phi_k f_k^2 = 0        (0 < f_k < f_max)
//! ```
//!
//! plus a normalization of `w`. The system is solved in the least-squares
//! sense and the scaled residual is a first-order optimality measure.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use super::closed_form::DualState;
use super::engine::Objective;
use crate::channel::ChannelRealization;
use crate::params::SystemParams;
use crate::specfun::rate_slope;
use crate::sysmodel::Allocation;

/// Recovered multipliers and the scaled stationarity residual.
pub fn recover(
    alloc: &Allocation,
    bits: &[f64],
    chan: &ChannelRealization,
    params: &SystemParams,
    objective: Objective,
) -> (DualState, f64) {
    let n = alloc.num_ws();
    let mut duals = DualState::ones(n);
    if n == 0 {
        return (duals, 0.0);
    }
    let fmax_tol = 1.0 - 1e-12;
    let snr: Vec<f64> = (0..n)
        .map(|k| {
            if alloc.slot[k] > 0.0 {
                alloc.tx_energy[k] * chan.ap_gain[k] / (alloc.slot[k] * params.noise)
            } else {
                0.0
            }
        })
        .collect();
    let time_gain: Vec<f64> = snr
        .iter()
        .map(|&x| params.bandwidth * rate_slope(x).unwrap_or(0.0))
        .collect();
    let energy_gain: Vec<f64> = (0..n)
        .map(|k| params.bandwidth * chan.ap_gain[k] / (LN_2 * params.noise * (1.0 + snr[k])))
        .collect();

    // Column scales keep the unknowns near unit size.
    let mu_scale = energy_gain.iter().copied().fold(0.0, f64::max).max(1.0);
    let l2_scale = time_gain.iter().copied().fold(0.0, f64::max).max(1.0);
    let cols = 2 * n + 1;
    let col_scale: Vec<f64> = (0..cols)
        .map(|c| match c {
            c if c < n => 1.0,
            c if c < 2 * n => mu_scale,
            _ => l2_scale,
        })
        .collect();

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let push = |rows: &mut Vec<(Vec<f64>, f64)>, mut a: Vec<f64>, mut b: f64| {
        for (v, s) in a.iter_mut().zip(&col_scale) {
            *v *= s;
        }
        let m = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(b.abs());
        if m > 0.0 {
            a.iter_mut().for_each(|v| *v /= m);
            b /= m;
            rows.push((a, b));
        }
    };

    let s_eta = params.eta;
    for k in 0..n {
        if alloc.slot[k] > 0.0 {
            let mut a = vec![0.0; cols];
            a[k] = time_gain[k];
            for j in (0..n).filter(|&j| j != k) {
                a[n + j] = params.p_max * s_eta * chan.h_gain[j];
            }
            a[2 * n] = -1.0;
            push(&mut rows, a, 0.0);
        }
        if alloc.tx_energy[k] > 0.0 {
            let mut a = vec![0.0; cols];
            a[k] = energy_gain[k];
            a[n + k] = -1.0;
            for j in (0..n).filter(|&j| j != k) {
                a[n + j] = s_eta * chan.x_gain[k][j];
            }
            push(&mut rows, a, 0.0);
        }
        let f = alloc.freq[k];
        if f > 0.0 && f < params.f_max[k] * fmax_tol {
            let mut a = vec![0.0; cols];
            a[k] = params.frame / params.cycles_per_bit[k];
            a[n + k] = -3.0 * params.frame * params.capacitance[k] * f * f;
            push(&mut rows, a, 0.0);
        }
    }
    let floor_slack = |k: usize| bits[k] > params.r_min[k] * (1.0 + 1e-9) + 1e-9;
    match objective {
        Objective::MaxMin => {
            let gamma = bits.iter().copied().fold(f64::INFINITY, f64::min);
            let mut a = vec![0.0; cols];
            a[..n].iter_mut().for_each(|v| *v = 1.0);
            push(&mut rows, a, 1.0);
            for k in (0..n).filter(|&k| bits[k] > gamma * (1.0 + 1e-7) + 1e-9) {
                let mut a = vec![0.0; cols];
                a[k] = 1.0;
                push(&mut rows, a, 0.0);
            }
        }
        Objective::SumRate => {
            for k in (0..n).filter(|&k| floor_slack(k)) {
                let mut a = vec![0.0; cols];
                a[k] = 1.0;
                push(&mut rows, a, 1.0);
            }
            if !(0..n).any(floor_slack) {
                let mut a = vec![0.0; cols];
                a[..n].iter_mut().for_each(|v| *v = 1.0);
                push(&mut rows, a, n as f64);
            }
        }
    }

    let m = rows.len();
    let a = DMatrix::from_fn(m, cols, |r, c| rows[r].0[c]);
    let b = DVector::from_fn(m, |r, _| rows[r].1);
    let z = match a.clone().svd(true, true).solve(&b, 1e-14) {
        Ok(z) => z.map(|v| v.max(0.0)),
        Err(_) => return (duals, f64::INFINITY),
    };
    let residual = (&a * &z - &b).norm() / (m as f64).sqrt();

    let w: Vec<f64> = (0..n).map(|k| z[k]).collect();
    let mu: Vec<f64> = (0..n).map(|k| z[n + k] * mu_scale).collect();
    duals.lambda2 = z[2 * n] * l2_scale;
    for k in 0..n {
        let others = (0..n).filter(|&j| j != k);
        duals.lambda1[k] = s_eta * others.clone().map(|j| mu[j] * chan.h_gain[j]).sum::<f64>();
        duals.eps1[k] = duals.lambda1[k];
        duals.lambda3[k] = mu[k];
        duals.eps2[k] = mu[k];
        duals.recycle_credit[k] = s_eta * others.map(|j| mu[j] * chan.x_gain[k][j]).sum::<f64>();
        let f = alloc.freq[k];
        duals.lambda4[k] = if f >= params.f_max[k] * fmax_tol {
            (w[k] * params.frame / params.cycles_per_bit[k]
                - 3.0 * mu[k] * params.frame * params.capacitance[k] * f * f)
                .max(0.0)
        } else {
            0.0
        };
        // The closed forms weight each WS's rate by lambda5 + lambda6. Under
        // the sum objective the unit rate weight and the floor multiplier
        // are both carried by lambda5.
        let (l5, l6) = match objective {
            Objective::MaxMin => (0.0, w[k]),
            Objective::SumRate => (w[k], 0.0),
        };
        duals.lambda5[k] = l5;
        duals.lambda6[k] = l6;
        duals.eps3[k] = l5;
        duals.eps6[k] = l6;
        duals.eps4[k] = 0.0;
        duals.eps5[k] = 0.0;
    }
    (duals, residual)
}
