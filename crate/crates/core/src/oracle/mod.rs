//! Reference solvers for the max-min problem, written against the system
//! model alone so they can check MFBA independently.
//!
//! Both eliminate the PS energy (`Pbar = P_max t`, optimal for any slot
//! vector) and search over slots, frequencies and transmit energies.

mod grid;
mod projected;

pub use grid::{brute_force_small, GridSpec};
pub use projected::solve_projected;

use crate::channel::ChannelRealization;
use crate::params::SystemParams;
use crate::sysmodel::{local_bits, offload_bits, Allocation};

/// Per-WS bits with the perspective extended by zero at `t = 0` regardless
/// of the transmit energy, which the searches may leave there transiently.
pub(crate) fn bits_lenient(
    alloc: &Allocation,
    chan: &ChannelRealization,
    params: &SystemParams,
) -> Vec<f64> {
    (0..alloc.num_ws())
        .map(|k| {
            let local = local_bits(alloc.freq[k].max(0.0), k, params).unwrap_or(0.0);
            let off = if alloc.slot[k] > 0.0 {
                offload_bits(
                    alloc.slot[k],
                    alloc.tx_energy[k].max(0.0),
                    chan.ap_gain[k],
                    params,
                )
                .unwrap_or(0.0)
            } else {
                0.0
            };
            local + off
        })
        .collect()
}
