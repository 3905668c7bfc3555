//! Max-min fairness-based allocation.

pub mod closed_form;
pub mod engine;
pub mod kkt;
pub mod response;

pub use closed_form::{
    optimal_frequency, optimal_ps_energy, optimal_time, optimal_ws_energy, DualState,
};
pub use engine::{Objective, SchemeSpec};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::sysmodel::{
    check_feasibility, consumed_energy, harvested_energy, local_bits, offload_bits, total_bits,
    Allocation, ConstraintReport,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    /// Cap on the inner energy fixed-point sweeps.
    pub max_dual_iters: usize,
    /// Initial step of the projected-gradient oracle.
    pub step0: f64,
    pub tol_gamma: f64,
    pub tol_feas: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 50,
            max_dual_iters: 200,
            step0: 0.05,
            tol_gamma: 1e-10,
            tol_feas: 1e-8,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str| {
            Err(Error::InvalidParam {
                name: name.into(),
                reason: "must be positive".into(),
            })
        };
        if self.max_outer_iters == 0 {
            return bad("max_outer_iters");
        }
        if self.max_dual_iters == 0 {
            return bad("max_dual_iters");
        }
        if !(self.step0 > 0.0) {
            return bad("step0");
        }
        if !(self.tol_gamma > 0.0) {
            return bad("tol_gamma");
        }
        if !(self.tol_feas > 0.0) {
            return bad("tol_feas");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    NotConverged,
    /// Some WS cannot reach `R_min`; the allocation is the best effort
    /// without the floors.
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::NotConverged => "not_converged",
            Self::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub scheme: String,
    pub alloc: Allocation,
    pub per_ws_bits: Vec<f64>,
    pub local_bits: Vec<f64>,
    pub offload_bits: Vec<f64>,
    /// Energy each WS spends, joules.
    pub per_ws_energy: Vec<f64>,
    pub harvested: Vec<f64>,
    pub constraints: ConstraintReport,
    pub outer_iters: usize,
    pub converged: bool,
    pub status: SolveStatus,
    /// Objective after each accepted iterate, starting point first.
    pub gamma_trace: Vec<f64>,
    pub duals: Option<DualState>,
    pub kkt_residual: f64,
}

impl SolveReport {
    pub fn gamma(&self) -> f64 {
        self.alloc.gamma
    }

    pub fn total_bits(&self) -> f64 {
        self.per_ws_bits.iter().sum()
    }

    pub fn min_bits(&self) -> f64 {
        self.per_ws_bits
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_bits(&self) -> f64 {
        self.per_ws_bits
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn bits_of(
    alloc: &Allocation,
    chan: &ChannelRealization,
    params: &SystemParams,
) -> Result<Vec<f64>> {
    (0..alloc.num_ws())
        .map(|k| total_bits(alloc, chan, params, k))
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish_report(
    scheme: SchemeSpec,
    alloc: Allocation,
    chan: &ChannelRealization,
    params: &SystemParams,
    config: &SolverConfig,
    outer_iters: usize,
    mut status: SolveStatus,
    gamma_trace: Vec<f64>,
) -> Result<SolveReport> {
    let n = alloc.num_ws();
    let per_ws_bits = bits_of(&alloc, chan, params)?;
    let local = (0..n)
        .map(|k| local_bits(alloc.freq[k], k, params))
        .collect::<Result<Vec<_>>>()?;
    let offload = (0..n)
        .map(|k| offload_bits(alloc.slot[k], alloc.tx_energy[k], chan.ap_gain[k], params))
        .collect::<Result<Vec<_>>>()?;
    let constraints = check_feasibility(&alloc, chan, params, config.tol_feas);
    if status == SolveStatus::Converged && !constraints.feasible {
        status = SolveStatus::NotConverged;
    }
    let offloads = alloc.slot.iter().any(|&t| t > 0.0);
    let (duals, kkt_residual) = if offloads {
        let (d, r) = kkt::recover(&alloc, &per_ws_bits, chan, params, scheme.objective);
        (Some(d), r)
    } else {
        (None, f64::NAN)
    };
    Ok(SolveReport {
        scheme: scheme.name.to_string(),
        per_ws_bits,
        local_bits: local,
        offload_bits: offload,
        per_ws_energy: (0..n).map(|k| consumed_energy(&alloc, params, k)).collect(),
        harvested: (0..n)
            .map(|k| harvested_energy(&alloc, chan, params, k))
            .collect(),
        constraints,
        outer_iters,
        converged: status == SolveStatus::Converged,
        status,
        gamma_trace,
        duals,
        kkt_residual,
        alloc,
    })
}

/// Runs MFBA on one channel realization.
pub fn solve(
    chan: &ChannelRealization,
    params: &SystemParams,
    config: &SolverConfig,
) -> Result<SolveReport> {
    solve_scheme(chan, params, config, SchemeSpec::MFBA)
}

/// Runs the alternating optimization for an arbitrary scheme.
pub fn solve_scheme(
    chan: &ChannelRealization,
    params: &SystemParams,
    config: &SolverConfig,
    scheme: SchemeSpec,
) -> Result<SolveReport> {
    if chan.num_ws() != params.num_ws() {
        return Err(Error::Dimension(format!(
            "channel has {} WSs, parameters {}",
            chan.num_ws(),
            params.num_ws()
        )));
    }
    engine::run(chan, params, config, scheme)
}
