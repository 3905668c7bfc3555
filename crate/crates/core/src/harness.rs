//! Seeded experiment runner behind the command-line tool.
//!
//! Every trial draws one topology and channel realization from
//! `mix([seed, trial])`. The sweep value and the scheme do not enter the
//! seed, so all schemes and all values of a sweep see the same nodes and
//! fading; sweeping `K` or `N` only adds links on top of the shared ones.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{solve_by_name, SCHEMES};
use crate::channel::{sample_channels, sample_topology, ChannelRealization, Topology};
use crate::error::{Error, Result};
use crate::mfba::{solve, SolveReport, SolverConfig};
use crate::oracle::{brute_force_small, solve_projected, GridSpec};
use crate::params::SystemParams;
use crate::seed::mix;
use crate::sysmodel::check_feasibility;

/// Environment variable overriding the worker-thread count.
pub const WORKERS_ENV: &str = "CERMEC_WORKERS";

/// Scientific notation with 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.11e}")
    }
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| Error::InvalidParam {
            name: WORKERS_ENV.into(),
            reason: format!("`{v}` is not a thread count"),
        })?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::InvalidParam {
        name: WORKERS_ENV.into(),
        reason: e.to_string(),
    })
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    mix(&[seed, trial as u64])
}

/// Topology and channels for one seed.
pub fn instance(params: &SystemParams, seed: u64) -> Result<(Topology, ChannelRealization)> {
    let topo = sample_topology(seed, params)?;
    let chan = sample_channels(seed, &topo, params)?;
    Ok((topo, chan))
}

fn load_params(config: Option<&Path>) -> Result<SystemParams> {
    match config {
        Some(p) => SystemParams::load(p),
        None => Ok(SystemParams::default()),
    }
}

/// Solves one seeded instance with the named scheme.
pub fn run_single(
    config: Option<&Path>,
    seed: u64,
    scheme: &str,
    solver: &SolverConfig,
) -> Result<SolveReport> {
    let params = load_params(config)?;
    let (_, chan) = instance(&params, seed)?;
    solve_by_name(scheme, &chan, &params, solver)
}

/// Human-readable report: per-WS bits, energy and slots, then the worst
/// constraint residual.
pub fn summary(r: &SolveReport) -> String {
    let mut s = format!(
        "scheme {}  status {}  outer iterations {}\n",
        r.scheme,
        r.status.as_str(),
        r.outer_iters
    );
    s += &format!(
        "gamma {:.6}  total {:.6}  min {:.6}  max {:.6}\n",
        r.gamma(),
        r.total_bits(),
        r.min_bits(),
        r.max_bits()
    );
    s += "ws  slot_s        freq_hz       tx_energy_j   harvested_j   used_j        bits\n";
    for k in 0..r.per_ws_bits.len() {
        s += &format!(
            "{k:<3} {:<13.6e} {:<13.6e} {:<13.6e} {:<13.6e} {:<13.6e} {:.6}\n",
            r.alloc.slot[k],
            r.alloc.freq[k],
            r.alloc.tx_energy[k],
            r.harvested[k],
            r.per_ws_energy[k],
            r.per_ws_bits[k]
        );
    }
    s += &format!(
        "worst scaled residual {:.3e} ({}), feasible {}\n",
        r.constraints.worst, r.constraints.worst_name, r.constraints.feasible
    );
    if r.kkt_residual.is_finite() {
        s += &format!("stationarity residual {:.3e}\n", r.kkt_residual);
    }
    s
}

pub const SOLVE_HEADER: [&str; 10] = [
    "ws",
    "slot",
    "ps_energy",
    "tx_energy",
    "freq",
    "local_bits",
    "offload_bits",
    "bits",
    "harvested",
    "used_energy",
];

/// Per-WS allocation table.
pub fn write_report_csv<W: Write>(r: &SolveReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SOLVE_HEADER)?;
    for k in 0..r.per_ws_bits.len() {
        w.write_record([
            k.to_string(),
            fmt_num(r.alloc.slot[k]),
            fmt_num(r.alloc.ps_energy[k]),
            fmt_num(r.alloc.tx_energy[k]),
            fmt_num(r.alloc.freq[k]),
            fmt_num(r.local_bits[k]),
            fmt_num(r.offload_bits[k]),
            fmt_num(r.per_ws_bits[k]),
            fmt_num(r.harvested[k]),
            fmt_num(r.per_ws_energy[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    PMax,
    K,
    N,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            Self::PMax => "P_max",
            Self::K => "K",
            Self::N => "N",
        }
    }

    /// Parameters with the swept quantity set to `value`.
    pub fn apply(self, base: &SystemParams, value: f64) -> Result<SystemParams> {
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidParam {
                    name: self.name().into(),
                    reason: format!("{value} is not a positive integer"),
                })
            }
        };
        let p = match self {
            Self::PMax => SystemParams {
                p_max: value,
                ..base.clone()
            },
            Self::K => base.with_num_ws(count()?),
            Self::N => SystemParams {
                antennas: count()?,
                ..base.clone()
            },
        };
        p.validate()?;
        Ok(p)
    }
}

impl std::str::FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P_max" | "p_max" | "pmax" => Ok(Self::PMax),
            "K" | "k" => Ok(Self::K),
            "N" | "n" => Ok(Self::N),
            _ => Err(Error::InvalidParam {
                name: "var".into(),
                reason: format!("`{s}` is not one of P_max, K, N"),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub variable: SweepVar,
    pub values: Vec<f64>,
    pub trials: usize,
    pub schemes: Vec<String>,
    pub base: SystemParams,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: &str| {
            Err(Error::InvalidParam {
                name: name.into(),
                reason: reason.into(),
            })
        };
        if self.values.is_empty() {
            return bad("values", "at least one value is required");
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("values", "must be strictly increasing");
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1");
        }
        if self.schemes.is_empty() {
            return bad("scheme", "at least one scheme is required");
        }
        for s in &self.schemes {
            if !SCHEMES.contains(&s.to_ascii_uppercase().as_str()) {
                return bad("scheme", &format!("unknown scheme `{s}`"));
            }
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub variable: &'static str,
    pub value: f64,
    pub scheme: String,
    pub trial: usize,
    pub seed: u64,
    pub total_bits: f64,
    pub min_bits: f64,
    pub max_bits: f64,
    pub gamma: f64,
    pub outer_iters: usize,
    pub converged: bool,
    pub status: String,
    pub wall_ms: f64,
}

pub const ROW_HEADER: [&str; 13] = [
    "variable",
    "value",
    "scheme",
    "trial",
    "seed",
    "total_bits",
    "min_bits",
    "max_bits",
    "gamma",
    "outer_iters",
    "converged",
    "status",
    "wall_ms",
];

fn row_from(spec: &SweepSpec, value: f64, trial: usize, seed: u64, scheme: &str) -> ResultRow {
    let start = Instant::now();
    let outcome = spec
        .variable
        .apply(&spec.base, value)
        .and_then(|p| instance(&p, seed).map(|(_, c)| (p, c)))
        .and_then(|(p, c)| solve_by_name(scheme, &c, &p, &spec.solver));
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let base = ResultRow {
        variable: spec.variable.name(),
        value,
        scheme: scheme.to_ascii_uppercase(),
        trial,
        seed,
        total_bits: f64::NAN,
        min_bits: f64::NAN,
        max_bits: f64::NAN,
        gamma: f64::NAN,
        outer_iters: 0,
        converged: false,
        status: String::new(),
        wall_ms,
    };
    match outcome {
        Ok(r) => ResultRow {
            total_bits: r.total_bits(),
            min_bits: r.min_bits(),
            max_bits: r.max_bits(),
            gamma: r.gamma(),
            outer_iters: r.outer_iters,
            converged: r.converged,
            status: r.status.as_str().into(),
            ..base
        },
        Err(e) => ResultRow {
            status: format!("error: {e}"),
            ..base
        },
    }
}

/// Runs every (value, trial, scheme) combination. Failed solves become
/// rows with an `error:` status. Rows come back in (value, trial, scheme)
/// order whatever the thread count.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let items: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let rows: Vec<Vec<ResultRow>> = pool()?.install(|| {
        items
            .par_iter()
            .map(|&(value, trial)| {
                let seed = trial_seed(spec.seed, trial);
                spec.schemes
                    .iter()
                    .map(|s| row_from(spec, value, trial, seed, s))
                    .collect()
            })
            .collect()
    });
    Ok(rows.into_iter().flatten().collect())
}

/// Writes the rows; `with_timing = false` drops the wall-clock column so
/// two runs can be compared byte for byte.
pub fn write_rows_csv<W: Write>(rows: &[ResultRow], out: W, with_timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let cols = if with_timing {
        ROW_HEADER.len()
    } else {
        ROW_HEADER.len() - 1
    };
    w.write_record(&ROW_HEADER[..cols])?;
    for r in rows {
        let mut rec = vec![
            r.variable.to_string(),
            fmt_num(r.value),
            r.scheme.clone(),
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_num(r.total_bits),
            fmt_num(r.min_bits),
            fmt_num(r.max_bits),
            fmt_num(r.gamma),
            r.outer_iters.to_string(),
            r.converged.to_string(),
            r.status.clone(),
        ];
        if with_timing {
            rec.push(format!("{:.3}", r.wall_ms));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-(value, scheme) means over the trials that produced a result.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub value: f64,
    pub scheme: String,
    pub trials: usize,
    pub converged: usize,
    pub mean_total: f64,
    pub mean_min: f64,
    pub mean_max: f64,
    pub mean_spread: f64,
    pub mean_gamma: f64,
}

pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(f64, String)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(v, s)| *v == r.value && *s == r.scheme) {
            keys.push((r.value, r.scheme.clone()));
        }
    }
    keys.into_iter()
        .map(|(value, scheme)| {
            let ok: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.value == value && r.scheme == scheme && r.total_bits.is_finite())
                .collect();
            let n = ok.len();
            let mean = |f: &dyn Fn(&ResultRow) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / n as f64
                }
            };
            AggregateRow {
                trials: n,
                converged: ok.iter().filter(|r| r.converged).count(),
                mean_total: mean(&|r| r.total_bits),
                mean_min: mean(&|r| r.min_bits),
                mean_max: mean(&|r| r.max_bits),
                mean_spread: mean(&|r| r.max_bits - r.min_bits),
                mean_gamma: mean(&|r| r.gamma),
                value,
                scheme,
            }
        })
        .collect()
}

pub const AGGREGATE_HEADER: [&str; 9] = [
    "value",
    "scheme",
    "trials",
    "converged",
    "mean_total_bits",
    "mean_min_bits",
    "mean_max_bits",
    "mean_spread_bits",
    "mean_gamma",
];

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_num(r.value),
            r.scheme.clone(),
            r.trials.to_string(),
            r.converged.to_string(),
            fmt_num(r.mean_total),
            fmt_num(r.mean_min),
            fmt_num(r.mean_max),
            fmt_num(r.mean_spread),
            fmt_num(r.mean_gamma),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `runs.csv` -> `runs_aggregate.csv` next to it.
pub fn aggregate_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sweep".into());
    out.with_file_name(format!("{stem}_aggregate.csv"))
}

/// Runs a sweep and writes the row file and its aggregate companion.
pub fn run_sweep_to(spec: &SweepSpec, out: &Path) -> Result<Vec<ResultRow>> {
    let rows = run_sweep(spec)?;
    write_rows_csv(&rows, std::fs::File::create(out)?, true)?;
    write_aggregate_csv(
        &aggregate(&rows),
        std::fs::File::create(aggregate_path(out))?,
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateRow {
    pub instance: usize,
    pub seed: u64,
    pub gamma_mfba: f64,
    pub gamma_grid: f64,
    pub gamma_projected: f64,
    pub delta_grid: f64,
    pub delta_projected: f64,
    /// Empty for a usable row, otherwise why it is excluded.
    pub note: String,
}

impl ValidateRow {
    pub fn usable(&self) -> bool {
        self.note.is_empty()
    }
}

/// MFBA against both oracles on `count` seeded K = 2, N = 2 instances at
/// the default constants.
pub fn run_validate(count: usize, seed: u64, solver: &SolverConfig) -> Result<Vec<ValidateRow>> {
    let params = SystemParams::uniform(2, 2);
    pool()?.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| validate_one(i, trial_seed(seed, i), &params, solver))
            .collect()
    })
}

fn validate_one(
    i: usize,
    seed: u64,
    params: &SystemParams,
    solver: &SolverConfig,
) -> Result<ValidateRow> {
    let (_, chan) = instance(params, seed)?;
    let mut row = ValidateRow {
        instance: i,
        seed,
        gamma_mfba: f64::NAN,
        gamma_grid: f64::NAN,
        gamma_projected: f64::NAN,
        delta_grid: f64::NAN,
        delta_projected: f64::NAN,
        note: String::new(),
    };
    let r = solve(&chan, params, solver)?;
    row.gamma_mfba = r.gamma();
    if !r.converged {
        row.note = r.status.as_str().into();
    }
    let solver = SolverConfig {
        seed,
        ..solver.clone()
    };
    match brute_force_small(&chan, params, GridSpec::default()) {
        Ok(a) => row.gamma_grid = a.gamma,
        Err(e) => row.note = format!("grid: {e}"),
    }
    match solve_projected(&chan, params, &solver) {
        Ok(a) => {
            debug_assert!(check_feasibility(&a, &chan, params, solver.tol_feas).feasible);
            row.gamma_projected = a.gamma;
        }
        Err(e) => row.note = format!("projected: {e}"),
    }
    if row.usable() {
        row.delta_grid = (row.gamma_mfba - row.gamma_grid) / row.gamma_grid;
        row.delta_projected = (row.gamma_mfba - row.gamma_projected) / row.gamma_projected;
    }
    Ok(row)
}

pub const VALIDATE_HEADER: [&str; 8] = [
    "instance",
    "seed",
    "gamma_mfba",
    "gamma_grid",
    "gamma_projected",
    "delta_grid",
    "delta_projected",
    "note",
];

pub fn write_validate_csv<W: Write>(rows: &[ValidateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VALIDATE_HEADER)?;
    for r in rows {
        w.write_record([
            r.instance.to_string(),
            r.seed.to_string(),
            fmt_num(r.gamma_mfba),
            fmt_num(r.gamma_grid),
            fmt_num(r.gamma_projected),
            fmt_num(r.delta_grid),
            fmt_num(r.delta_projected),
            r.note.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(1.0), "1.00000000000e0");
        assert_eq!(fmt_num(-2.5e-7), "-2.50000000000e-7");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn sweep_var_parsing() {
        assert_eq!("P_max".parse::<SweepVar>().unwrap(), SweepVar::PMax);
        assert!("M".parse::<SweepVar>().is_err());
        let base = SystemParams::default();
        assert_eq!(SweepVar::K.apply(&base, 6.0).unwrap().num_ws(), 6);
        assert_eq!(SweepVar::N.apply(&base, 2.0).unwrap().antennas, 2);
        assert!(SweepVar::K.apply(&base, 2.5).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec {
            variable: SweepVar::PMax,
            values: vec![0.5, 1.0],
            trials: 1,
            schemes: vec!["mfba".into()],
            base: SystemParams::default(),
            seed: 1,
            solver: SolverConfig::default(),
        };
        assert!(spec.validate().is_ok());
        spec.values = vec![1.0, 0.5];
        assert!(spec.validate().is_err());
        spec.values = vec![];
        assert!(spec.validate().is_err());
        spec.values = vec![1.0];
        spec.schemes = vec!["nope".into()];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn aggregate_path_naming() {
        assert_eq!(
            aggregate_path(Path::new("/tmp/runs.csv")),
            PathBuf::from("/tmp/runs_aggregate.csv")
        );
    }
}
