//! Zooming grid search over slots and CPU frequencies for `K <= 2`.
//!
//! Each cell fixes `(t, f)`; the transmit energies then take whatever the
//! harvest leaves after computing, which is the best choice because the
//! rate grows with transmit energy and recycling only adds to the harvest.
//! After a full pass the grid is re-centered on the best cell and shrunk.

use rayon::prelude::*;

use super::bits_lenient;
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::sysmodel::{check_feasibility, harvested_energy, local_energy, Allocation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub points_per_axis: usize,
    /// Number of refinement passes after the first full-range pass.
    pub zoom_levels: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points_per_axis: 21,
            zoom_levels: 14,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 3 {
            return Err(Error::InvalidParam {
                name: "points_per_axis".into(),
                reason: "must be at least 3".into(),
            });
        }
        Ok(())
    }
}

const FEAS_TOL: f64 = 1e-9;

/// Transmit energies spending the remaining harvest, by a Jacobi sweep from
/// zero. `None` when some WS cannot even pay for its CPU.
fn fill_energy(
    alloc: &mut Allocation,
    chan: &ChannelRealization,
    params: &SystemParams,
) -> Option<()> {
    let k = alloc.num_ws();
    alloc.tx_energy.iter_mut().for_each(|e| *e = 0.0);
    for _ in 0..100 {
        let mut changed = false;
        let next: Vec<f64> = (0..k)
            .map(|i| {
                if alloc.slot[i] > 0.0 {
                    (harvested_energy(alloc, chan, params, i)
                        - local_energy(alloc.freq[i], i, params))
                    .max(0.0)
                } else {
                    0.0
                }
            })
            .collect();
        for (old, new) in alloc.tx_energy.iter_mut().zip(next) {
            if (new - *old).abs() > 1e-15 * new {
                changed = true;
            }
            *old = new;
        }
        if !changed {
            break;
        }
    }
    // Sweeps from zero only add energy, so the final vector overshoots by
    // at most one sweep's rounding; shave it off.
    for i in 0..k {
        let over = local_energy(alloc.freq[i], i, params) + alloc.tx_energy[i]
            - harvested_energy(alloc, chan, params, i);
        if over > 0.0 {
            alloc.tx_energy[i] -= over;
            if alloc.tx_energy[i] < 0.0 {
                return None;
            }
        }
    }
    Some(())
}

fn evaluate(
    point: &[f64],
    chan: &ChannelRealization,
    params: &SystemParams,
) -> Option<(f64, Allocation)> {
    let k = chan.num_ws();
    let mut alloc = Allocation::zeros(k);
    alloc.slot.copy_from_slice(&point[..k]);
    alloc.freq.copy_from_slice(&point[k..]);
    if alloc.slot.iter().sum::<f64>() > params.slot_budget() * (1.0 + 1e-12) {
        return None;
    }
    alloc.ps_energy = alloc.slot.iter().map(|t| params.p_max * t).collect();
    fill_energy(&mut alloc, chan, params)?;
    let bits = bits_lenient(&alloc, chan, params);
    alloc.gamma = bits.iter().copied().fold(f64::INFINITY, f64::min);
    check_feasibility(&alloc, chan, params, FEAS_TOL)
        .feasible
        .then_some((alloc.gamma, alloc))
}

/// Exhaustive max-min search on a zooming grid. Ties go to the smallest
/// lexicographic grid index.
pub fn brute_force_small(
    chan: &ChannelRealization,
    params: &SystemParams,
    grid: GridSpec,
) -> Result<Allocation> {
    grid.validate()?;
    params.validate()?;
    let k = chan.num_ws();
    if k > 2 || k != params.num_ws() {
        return Err(Error::Dimension(format!(
            "grid search handles K <= 2 matching the parameters, got {k}"
        )));
    }
    let dims = 2 * k;
    let n = grid.points_per_axis | 1;
    let upper: Vec<f64> = (0..dims)
        .map(|d| {
            if d < k {
                params.slot_budget()
            } else {
                params.f_max[d - k]
            }
        })
        .collect();
    let mut lo = vec![0.0; dims];
    let mut hi = upper.clone();
    let mut best: Option<(f64, Allocation, Vec<f64>)> = None;

    for _ in 0..=grid.zoom_levels {
        let axes: Vec<Vec<f64>> = (0..dims)
            .map(|d| {
                (0..n)
                    .map(|i| lo[d] + (hi[d] - lo[d]) * i as f64 / (n - 1) as f64)
                    .collect()
            })
            .collect();
        let cells = n.pow(dims as u32);
        let found = (0..cells)
            .into_par_iter()
            .filter_map(|idx| {
                let mut point = vec![0.0; dims];
                let mut rest = idx;
                for d in (0..dims).rev() {
                    point[d] = axes[d][rest % n];
                    rest /= n;
                }
                evaluate(&point, chan, params).map(|(g, a)| (g, idx, a, point))
            })
            .reduce_with(|a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            })
            .map(|(g, _, a, p)| (g, a, p));
        if let Some(c) = found {
            if best.as_ref().is_none_or(|b| c.0 > b.0) {
                best = Some(c);
            }
        }
        let Some((_, _, centre)) = &best else {
            break;
        };
        for d in 0..dims {
            let half = 3.0 * (hi[d] - lo[d]) / (n - 1) as f64;
            lo[d] = (centre[d] - half).max(0.0);
            hi[d] = (centre[d] + half).min(upper[d]);
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| Error::NoFeasiblePoint("no grid cell meets every constraint".into()))
}
