//! Projected-gradient ascent on a smoothed max-min objective.
//!
//! Variables are normalized to unit boxes: `u = t / S` on the set
//! `{u >= 0, sum u <= 1}`, `v = f / f_max` and `w = pbar / E_cap` in
//! `[0, 1]`, where `E_cap` bounds what a WS could ever harvest. The minimum
//! rate is replaced by a softmin whose temperature falls over the run, and
//! energy causality and the bit floors enter as quadratic penalties whose
//! weight rises. Gradients are central differences. A final repair pass
//! trims transmit energy until causality holds exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bits_lenient;
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::mfba::SolverConfig;
use crate::params::SystemParams;
use crate::sysmodel::{check_feasibility, harvested_energy, local_energy, Allocation};

const STAGES: usize = 12;
const ITERS_PER_STAGE: usize = 400;
const FD_STEP: f64 = 1e-7;

struct Problem<'a> {
    chan: &'a ChannelRealization,
    params: &'a SystemParams,
    k: usize,
    e_cap: Vec<f64>,
    r_ref: f64,
}

impl Problem<'_> {
    fn decode(&self, z: &[f64]) -> Allocation {
        let (k, p) = (self.k, self.params);
        let mut a = Allocation::zeros(k);
        for i in 0..k {
            a.slot[i] = p.slot_budget() * z[i].max(0.0);
            a.ps_energy[i] = p.p_max * a.slot[i];
            a.freq[i] = p.f_max[i] * z[k + i].clamp(0.0, 1.0);
            a.tx_energy[i] = if a.slot[i] > 0.0 {
                self.e_cap[i] * z[2 * k + i].clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        a
    }

    fn value(&self, z: &[f64], tau: f64, rho: f64) -> f64 {
        let a = self.decode(z);
        let bits = bits_lenient(&a, self.chan, self.params);
        let r: Vec<f64> = bits.iter().map(|b| b / self.r_ref).collect();
        let lowest = r.iter().copied().fold(f64::INFINITY, f64::min);
        let softmin = lowest
            - tau
                * r.iter()
                    .map(|x| (-(x - lowest) / tau).exp())
                    .sum::<f64>()
                    .ln();
        let mut penalty = 0.0;
        for i in 0..self.k {
            let used = local_energy(a.freq[i], i, self.params) + a.tx_energy[i];
            let c = (used - harvested_energy(&a, self.chan, self.params, i)) / self.e_cap[i];
            penalty += c.max(0.0).powi(2);
            let short = (self.params.r_min[i] - bits[i]) / self.r_ref;
            penalty += short.max(0.0).powi(2);
        }
        softmin - rho * penalty
    }

    fn gradient(&self, z: &[f64], tau: f64, rho: f64) -> Vec<f64> {
        let mut g = vec![0.0; z.len()];
        let mut probe = z.to_vec();
        for d in 0..z.len() {
            probe[d] = z[d] + FD_STEP;
            let up = self.value(&probe, tau, rho);
            probe[d] = z[d] - FD_STEP;
            let down = self.value(&probe, tau, rho);
            probe[d] = z[d];
            g[d] = (up - down) / (2.0 * FD_STEP);
        }
        g
    }

    fn project(&self, z: &mut [f64]) {
        let k = self.k;
        project_capped_simplex(&mut z[..k]);
        z[k..].iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    }
}

/// Euclidean projection onto `{x >= 0, sum x <= 1}`.
pub(crate) fn project_capped_simplex(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    if x.iter().sum::<f64>() <= 1.0 {
        return;
    }
    // Equality projection after clipping is not the projection of the
    // original point; redo it from the sorted values.
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    x.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

/// Lowers transmit energy, then frequency, until every WS lives within its
/// harvest. Each cut only shrinks what the others harvest, so the loop
/// moves monotonically to a feasible point.
fn repair(a: &mut Allocation, chan: &ChannelRealization, params: &SystemParams) {
    for _ in 0..200 {
        let mut changed = false;
        for i in 0..a.num_ws() {
            let harvest = harvested_energy(a, chan, params, i);
            let cpu = local_energy(a.freq[i], i, params);
            if cpu > harvest {
                a.freq[i] =
                    (harvest / (params.frame * params.capacitance[i])).cbrt() * (1.0 - 1e-12);
                a.tx_energy[i] = 0.0;
                changed = true;
            } else if a.tx_energy[i] > harvest - cpu {
                a.tx_energy[i] = ((harvest - cpu) * (1.0 - 1e-12)).max(0.0);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Max-min allocation by smoothed projected-gradient ascent.
pub fn solve_projected(
    chan: &ChannelRealization,
    params: &SystemParams,
    config: &SolverConfig,
) -> Result<Allocation> {
    params.validate()?;
    config.validate()?;
    let k = chan.num_ws();
    if k != params.num_ws() {
        return Err(Error::Dimension(format!(
            "channel has {k} WSs, parameters {}",
            params.num_ws()
        )));
    }
    let s = params.slot_budget();
    let direct: Vec<f64> = (0..k)
        .map(|i| params.eta * params.p_max * s * chan.h_gain[i])
        .collect();
    let e_cap: Vec<f64> = (0..k)
        .map(|i| {
            let rec: f64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| params.eta * direct[j] * chan.x_gain[j][i])
                .sum();
            ((direct[i] + rec) * 1.001).max(f64::MIN_POSITIVE)
        })
        .collect();
    let r_ref = (0..k)
        .map(|i| params.frame * params.f_max[i] / params.cycles_per_bit[i])
        .fold(0.0, f64::max)
        + s * params.bandwidth;
    let prob = Problem {
        chan,
        params,
        k,
        e_cap,
        r_ref,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut z = vec![0.0; 3 * k];
    for i in 0..k {
        z[i] = (1.0 + 0.01 * rng.random_range(-1.0..1.0)) / k as f64;
        z[k + i] = 1.0;
        z[2 * k + i] = 0.5;
    }
    prob.project(&mut z);

    let mut step = config.step0;
    for stage in 0..STAGES {
        let frac = stage as f64 / (STAGES - 1) as f64;
        let tau = 0.05 * (1e-6f64 / 0.05).powf(frac);
        let rho = 10.0 * 1e4f64.powf(frac);
        let mut current = prob.value(&z, tau, rho);
        for _ in 0..ITERS_PER_STAGE {
            let g = prob.gradient(&z, tau, rho);
            let reach = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !(reach > 0.0) {
                break;
            }
            // Far-reaching steps just land on the box after projection, but
            // unbounded growth would overflow the simplex projection.
            step = step.min(1e3 / reach);
            let mut accepted = false;
            for _ in 0..40 {
                let mut trial: Vec<f64> = z.iter().zip(&g).map(|(x, d)| x + step * d).collect();
                prob.project(&mut trial);
                let v = prob.value(&trial, tau, rho);
                if v >= current {
                    z = trial;
                    current = v;
                    step *= 1.5;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                step = config.step0;
                break;
            }
        }
    }

    let mut alloc = prob.decode(&z);
    repair(&mut alloc, chan, params);
    let bits = bits_lenient(&alloc, chan, params);
    alloc.gamma = bits.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let report = check_feasibility(&alloc, chan, params, config.tol_feas);
    if !report.feasible {
        return Err(Error::NoFeasiblePoint(format!(
            "projected ascent ended infeasible ({} residual {:e})",
            report.worst_name, report.worst
        )));
    }
    Ok(alloc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        let mut x = [0.3, 0.2];
        project_capped_simplex(&mut x);
        assert_eq!(x, [0.3, 0.2]);
        let mut x = [2.0, 0.0];
        project_capped_simplex(&mut x);
        assert_eq!(x, [1.0, 0.0]);
        let mut x = [0.8, 0.6, -1.0];
        project_capped_simplex(&mut x);
        assert!((x[0] - 0.6).abs() < 1e-15 && (x[1] - 0.4).abs() < 1e-15 && x[2] == 0.0);
    }

    #[test]
    fn dead_uplink_keeps_energy_home() {
        // A fast CPU makes local computing energy-bound, and a dead uplink
        // makes every transmitted joule a loss.
        let mut p = SystemParams::uniform(2, 1);
        p.r_min = vec![0.0; 2];
        p.f_max = vec![1e9; 2];
        let c = ChannelRealization::from_gains(
            vec![6e-6, 6e-6],
            vec![vec![0.0, 1e-4], vec![1e-4, 0.0]],
            vec![1e-30, 1e-30],
        )
        .unwrap();
        let a = solve_projected(&c, &p, &SolverConfig::default()).unwrap();
        for k in 0..2 {
            let h = harvested_energy(&a, &c, &p, k);
            assert!(
                a.tx_energy[k] <= 1e-3 * h,
                "k={k}: {} of {h}",
                a.tx_energy[k]
            );
        }
    }
}
