//! Comparison schemes: sum-rate (ZFBA), full local computing (FLCA), full
//! offloading (FCOA) and max-min without energy recycling (NERA).

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::mfba::{engine, solve_scheme, SchemeSpec, SolveReport, SolveStatus, SolverConfig};
use crate::params::SystemParams;
use crate::sysmodel::Allocation;

/// Maximizes the total bits under the same constraints as MFBA minus the
/// fairness slack. The per-WS floor `R_min` stays in force.
pub fn solve_zfba(
    chan: &ChannelRealization,
    params: &SystemParams,
    config: &SolverConfig,
) -> Result<SolveReport> {
    solve_scheme(chan, params, config, SchemeSpec::ZFBA)
}

/// MFBA with the CPUs switched off.
pub fn solve_fcoa(
    chan: &ChannelRealization,
    params: &SystemParams,
    config: &SolverConfig,
) -> Result<SolveReport> {
    solve_scheme(chan, params, config, SchemeSpec::FCOA)
}

/// MFBA without the energy WSs harvest from each other's uplink.
pub fn solve_nera(
    chan: &ChannelRealization,
    params: &SystemParams,
    config: &SolverConfig,
) -> Result<SolveReport> {
    solve_scheme(chan, params, config, SchemeSpec::NERA)
}

const FLCA: SchemeSpec = SchemeSpec {
    name: "FLCA",
    objective: engine::Objective::MaxMin,
    local: true,
    recycling: false,
};

/// No offloading: the PS charges for the whole frame and every WS runs its
/// CPU as fast as the harvest allows,
/// `f_k = min(f_max, (eta P_max |h_k|^2 / phi_k)^(1/3))`.
pub fn solve_flca(chan: &ChannelRealization, params: &SystemParams) -> Result<SolveReport> {
    params.validate()?;
    let n = chan.num_ws();
    if n != params.num_ws() {
        return Err(Error::Dimension(format!(
            "channel has {n} WSs, parameters {}",
            params.num_ws()
        )));
    }
    let mut alloc = Allocation::zeros(n);
    alloc.idle_charge = params.p_max * params.frame;
    for k in 0..n {
        let f = (params.eta * params.p_max * chan.h_gain[k] / params.capacitance[k]).cbrt();
        alloc.freq[k] = f.min(params.f_max[k]);
    }
    let bits: Vec<f64> = (0..n)
        .map(|k| params.frame * alloc.freq[k] / params.cycles_per_bit[k])
        .collect();
    alloc.gamma = bits.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let status = if (0..n).all(|k| bits[k] >= params.r_min[k]) {
        SolveStatus::Converged
    } else {
        SolveStatus::Infeasible
    };
    let config = SolverConfig::default();
    crate::mfba::finish_report(FLCA, alloc, chan, params, &config, 0, status, vec![])
}

/// Scheme names accepted by [`solve_by_name`].
pub const SCHEMES: [&str; 5] = ["MFBA", "ZFBA", "FLCA", "FCOA", "NERA"];

/// Dispatches on a case-insensitive scheme name.
pub fn solve_by_name(
    name: &str,
    chan: &ChannelRealization,
    params: &SystemParams,
    config: &SolverConfig,
) -> Result<SolveReport> {
    match name.to_ascii_uppercase().as_str() {
        "MFBA" => crate::mfba::solve(chan, params, config),
        "ZFBA" => solve_zfba(chan, params, config),
        "FLCA" => solve_flca(chan, params),
        "FCOA" => solve_fcoa(chan, params, config),
        "NERA" => solve_nera(chan, params, config),
        other => Err(Error::InvalidParam {
            name: "scheme".into(),
            reason: format!("unknown scheme {other:?}, expected one of {SCHEMES:?}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flca_hand_value() {
        // eta P_max h / phi = 0.8 * 1.25e-12 / 1e-30 = 1e18, cube root 1e6.
        let p = SystemParams::uniform(2, 1);
        let c = ChannelRealization::from_gains(
            vec![1.25e-12, 0.0],
            vec![vec![0.0, 1e-4], vec![1e-4, 0.0]],
            vec![1e-6, 1e-6],
        )
        .unwrap();
        let r = solve_flca(&c, &p).unwrap();
        assert!((r.alloc.freq[0] - 1e6).abs() < 1e-3);
        assert!((r.per_ws_bits[0] - 1000.0).abs() < 1e-9);
        assert_eq!(r.per_ws_bits[1], 0.0);
        assert!(r.alloc.slot.iter().all(|&t| t == 0.0));
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unknown_scheme_is_rejected() {
        let p = SystemParams::uniform(1, 1);
        let c = ChannelRealization::from_gains(vec![1e-6], vec![vec![0.0]], vec![1e-6]).unwrap();
        assert!(solve_by_name("XYZ", &c, &p, &SolverConfig::default()).is_err());
    }
}
