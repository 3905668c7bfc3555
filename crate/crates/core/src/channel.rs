//! Seeded node placement and channel power gains.
//!
//! The PS sits at the origin and the AP 15 m away on the x-axis. WSs are
//! placed one at a time, uniformly over the region that keeps them within
//! 15 m of both the PS and the AP, within 5 m of every WS already placed and
//! at least [`MIN_SEPARATION`] from every node. Placement consumes a single
//! random stream, so the first `K` positions for a seed do not depend on how
//! many WSs follow.
//!
//! Every link draws its fading from its own stream keyed by the seed and the
//! link endpoints. Realizations for different `K` or `N` under the same seed
//! therefore share the gains of the links they have in common.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::seed::mix;

/// Path loss at the 1 m reference distance (-30 dB).
pub const PATH_LOSS_REF: f64 = 1e-3;
pub const PATH_LOSS_EXPONENT: f64 = 2.2;
/// Maximum PS-WS and WS-AP distance, meters.
pub const MAX_LINK_DISTANCE: f64 = 15.0;
/// Maximum distance between two WSs, meters.
pub const MAX_WS_SPREAD: f64 = 5.0;
/// Minimum distance between two distinct nodes, meters.
pub const MIN_SEPARATION: f64 = 0.5;

const PS_AP_DISTANCE: f64 = 15.0;
const MAX_ATTEMPTS_PER_WS: usize = 100_000;

const TAG_TOPOLOGY: u64 = 0x746f_706f;
const TAG_PS_WS: u64 = 0x7073_7773;
const TAG_WS_WS: u64 = 0x7773_7773;
const TAG_WS_AP: u64 = 0x7773_6170;

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// `kappa * max(d, 1)^-2.2`.
pub fn path_loss(d: f64) -> f64 {
    PATH_LOSS_REF * d.max(1.0).powf(-PATH_LOSS_EXPONENT)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub ps_position: Point,
    pub ap_position: Point,
    pub ws_positions: Vec<Point>,
}

impl Topology {
    pub fn num_ws(&self) -> usize {
        self.ws_positions.len()
    }

    pub fn ps_distance(&self, k: usize) -> f64 {
        distance(self.ps_position, self.ws_positions[k])
    }

    pub fn ap_distance(&self, k: usize) -> f64 {
        distance(self.ws_positions[k], self.ap_position)
    }

    pub fn ws_distance(&self, i: usize, j: usize) -> f64 {
        distance(self.ws_positions[i], self.ws_positions[j])
    }

    /// Checks every placement bound; returns the first violation.
    pub fn check(&self) -> Result<()> {
        let fail = |msg: String| {
            Err(Error::InvalidParam {
                name: "topology".into(),
                reason: msg,
            })
        };
        let k = self.num_ws();
        for i in 0..k {
            let (dp, da) = (self.ps_distance(i), self.ap_distance(i));
            if dp > MAX_LINK_DISTANCE || da > MAX_LINK_DISTANCE {
                return fail(format!(
                    "WS {i} is {dp:.3} m from the PS and {da:.3} m from the AP"
                ));
            }
            if dp < MIN_SEPARATION || da < MIN_SEPARATION {
                return fail(format!(
                    "WS {i} is closer than {MIN_SEPARATION} m to the PS or AP"
                ));
            }
            for j in i + 1..k {
                let d = self.ws_distance(i, j);
                if !(MIN_SEPARATION..=MAX_WS_SPREAD).contains(&d) {
                    return fail(format!("WS {i} and WS {j} are {d:.3} m apart"));
                }
            }
        }
        Ok(())
    }
}

fn in_service_region(p: Point, ps: Point, ap: Point) -> bool {
    let (dp, da) = (distance(p, ps), distance(p, ap));
    dp <= MAX_LINK_DISTANCE
        && da <= MAX_LINK_DISTANCE
        && dp >= MIN_SEPARATION
        && da >= MIN_SEPARATION
}

/// Places `K` WSs for the given seed.
pub fn sample_topology(seed: u64, params: &SystemParams) -> Result<Topology> {
    let k = params.num_ws();
    if k == 0 {
        return Err(Error::InvalidParam {
            name: "K".into(),
            reason: "must be at least 1".into(),
        });
    }
    let ps = [0.0, 0.0];
    let ap = [PS_AP_DISTANCE, 0.0];
    let half_height = (MAX_LINK_DISTANCE.powi(2) - (PS_AP_DISTANCE / 2.0).powi(2)).sqrt();
    let region = [
        [PS_AP_DISTANCE - MAX_LINK_DISTANCE, MAX_LINK_DISTANCE],
        [-half_height, half_height],
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, TAG_TOPOLOGY]));
    let mut placed: Vec<Point> = Vec::with_capacity(k);
    for _ in 0..k {
        // Later WSs must fall within MAX_WS_SPREAD of the first one, so the
        // sampling box shrinks to that neighbourhood. Rejection from a
        // superset box keeps the accepted point uniform on the valid region.
        let bounds = match placed.first() {
            None => region,
            Some(first) => [
                [
                    (first[0] - MAX_WS_SPREAD).max(region[0][0]),
                    (first[0] + MAX_WS_SPREAD).min(region[0][1]),
                ],
                [
                    (first[1] - MAX_WS_SPREAD).max(region[1][0]),
                    (first[1] + MAX_WS_SPREAD).min(region[1][1]),
                ],
            ],
        };
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS_PER_WS {
            let p = [
                rng.random_range(bounds[0][0]..=bounds[0][1]),
                rng.random_range(bounds[1][0]..=bounds[1][1]),
            ];
            if in_service_region(p, ps, ap)
                && placed.iter().all(|&q| {
                    let d = distance(p, q);
                    (MIN_SEPARATION..=MAX_WS_SPREAD).contains(&d)
                })
            {
                accepted = Some(p);
                break;
            }
        }
        match accepted {
            Some(p) => placed.push(p),
            None => {
                return Err(Error::Geometry {
                    k,
                    attempts: MAX_ATTEMPTS_PER_WS,
                })
            }
        }
    }
    Ok(Topology {
        ps_position: ps,
        ap_position: ap,
        ws_positions: placed,
    })
}

/// One draw of every channel power gain in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// PS -> WS_k power gain `|h_k|^2`.
    pub h_gain: Vec<f64>,
    /// WS_i -> WS_k power gain `|g_{i,k}|^2`; the diagonal is zero.
    pub x_gain: Vec<Vec<f64>>,
    /// WS_k -> AP gain after MRC, `||g_k||^2`.
    pub ap_gain: Vec<f64>,
    /// WS_k -> AP channel vectors.
    pub ap_vec: Vec<Vec<Complex64>>,
}

fn unit_cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn link_rng(seed: u64, tag: u64, a: usize, b: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(&[seed, tag, a as u64, b as u64]))
}

/// Path loss times unit-mean Rayleigh fading on every link.
pub fn sample_channels(
    seed: u64,
    topo: &Topology,
    params: &SystemParams,
) -> Result<ChannelRealization> {
    topo.check()?;
    let k = topo.num_ws();
    if k != params.num_ws() {
        return Err(Error::Dimension(format!(
            "topology has {k} WSs but params have {}",
            params.num_ws()
        )));
    }
    let n = params.antennas;

    let h_gain = (0..k)
        .map(|i| {
            let z = unit_cn(&mut link_rng(seed, TAG_PS_WS, i, 0));
            path_loss(topo.ps_distance(i)) * z.norm_sqr()
        })
        .collect();

    let mut x_gain = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let z = unit_cn(&mut link_rng(seed, TAG_WS_WS, i, j));
            let g = path_loss(topo.ws_distance(i, j)) * z.norm_sqr();
            x_gain[i][j] = g;
            x_gain[j][i] = g;
        }
    }

    let mut ap_vec = Vec::with_capacity(k);
    for i in 0..k {
        let amp = path_loss(topo.ap_distance(i)).sqrt();
        let mut rng = link_rng(seed, TAG_WS_AP, i, 0);
        ap_vec.push((0..n).map(|_| unit_cn(&mut rng) * amp).collect::<Vec<_>>());
    }
    let ap_gain = ap_vec.iter().map(|v| squared_norm(v)).collect();

    Ok(ChannelRealization {
        h_gain,
        x_gain,
        ap_gain,
        ap_vec,
    })
}

pub fn squared_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

impl ChannelRealization {
    /// Realization from explicit power gains. Each AP vector is the
    /// single-entry vector `[sqrt(ap_gain[k])]`.
    pub fn from_gains(h_gain: Vec<f64>, x_gain: Vec<Vec<f64>>, ap_gain: Vec<f64>) -> Result<Self> {
        let k = h_gain.len();
        if ap_gain.len() != k || x_gain.len() != k || x_gain.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension(format!(
                "gain arrays disagree on K ({} / {} / {})",
                k,
                ap_gain.len(),
                x_gain.len()
            )));
        }
        let ap_vec = ap_gain
            .iter()
            .map(|&g| vec![Complex64::new(g.sqrt(), 0.0)])
            .collect();
        Ok(Self {
            h_gain,
            x_gain,
            ap_gain,
            ap_vec,
        })
    }

    pub fn num_ws(&self) -> usize {
        self.h_gain.len()
    }

    /// All gains multiplied by `alpha` (vectors by `sqrt(alpha)`).
    pub fn scaled(&self, alpha: f64) -> Self {
        let amp = alpha.sqrt();
        Self {
            h_gain: self.h_gain.iter().map(|g| g * alpha).collect(),
            x_gain: self
                .x_gain
                .iter()
                .map(|r| r.iter().map(|g| g * alpha).collect())
                .collect(),
            ap_gain: self.ap_gain.iter().map(|g| g * alpha).collect(),
            ap_vec: self
                .ap_vec
                .iter()
                .map(|v| v.iter().map(|z| z * amp).collect())
                .collect(),
        }
    }

    /// Same realization with every WS-to-WS energy link removed.
    pub fn without_recycling(&self) -> Self {
        let k = self.num_ws();
        Self {
            x_gain: vec![vec![0.0; k]; k],
            ..self.clone()
        }
    }

    /// Writes a replay table: one row per link with endpoints, distance and
    /// gain, plus one row per AP antenna coefficient. Floats use the
    /// shortest representation that parses back to the same bits.
    pub fn to_replay(&self, topo: Option<&Topology>) -> String {
        let k = self.num_ws();
        let dist = |f: &dyn Fn(&Topology) -> f64| topo.map_or(f64::NAN, f);
        let mut out = String::from("# kind from to distance gain\n");
        for i in 0..k {
            let d = dist(&|t| t.ps_distance(i));
            let _ = writeln!(out, "link PS WS{i} {d:e} {:e}", self.h_gain[i]);
        }
        for i in 0..k {
            for j in i + 1..k {
                let d = dist(&|t| t.ws_distance(i, j));
                let _ = writeln!(out, "link WS{i} WS{j} {d:e} {:e}", self.x_gain[i][j]);
            }
        }
        for i in 0..k {
            let d = dist(&|t| t.ap_distance(i));
            let _ = writeln!(out, "link WS{i} AP {d:e} {:e}", self.ap_gain[i]);
        }
        let _ = writeln!(out, "# kind ws antenna re im");
        for (i, v) in self.ap_vec.iter().enumerate() {
            for (n, z) in v.iter().enumerate() {
                let _ = writeln!(out, "coef WS{i} {n} {:e} {:e}", z.re, z.im);
            }
        }
        out
    }

    pub fn from_replay(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Replay(format!("line {line}: {msg}"));
        let ws_index = |tok: &str, line: usize| -> Result<usize> {
            tok.strip_prefix("WS")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(line, &format!("bad WS label `{tok}`")))
        };
        let num = |tok: &str, line: usize| -> Result<f64> {
            tok.parse::<f64>()
                .map_err(|_| bad(line, &format!("bad number `{tok}`")))
        };

        let mut h = Vec::new();
        let mut x = Vec::new();
        let mut ap = Vec::new();
        let mut coefs: Vec<(usize, usize, Complex64)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let tok: Vec<&str> = raw.split_whitespace().collect();
            match tok.as_slice() {
                ["link", "PS", b, _d, g] => h.push((ws_index(b, line)?, num(g, line)?)),
                ["link", a, "AP", _d, g] => ap.push((ws_index(a, line)?, num(g, line)?)),
                ["link", a, b, _d, g] => {
                    x.push((ws_index(a, line)?, ws_index(b, line)?, num(g, line)?))
                }
                ["coef", a, n, re, im] => coefs.push((
                    ws_index(a, line)?,
                    n.parse().map_err(|_| bad(line, "bad antenna index"))?,
                    Complex64::new(num(re, line)?, num(im, line)?),
                )),
                _ => return Err(bad(line, "unrecognized row")),
            }
        }

        let k = h.len();
        let mut out = Self {
            h_gain: vec![f64::NAN; k],
            x_gain: vec![vec![0.0; k]; k],
            ap_gain: vec![f64::NAN; k],
            ap_vec: vec![Vec::new(); k],
        };
        let check = |i: usize| {
            if i < k {
                Ok(i)
            } else {
                Err(Error::Replay(format!("WS{i} out of range for K = {k}")))
            }
        };
        for (i, g) in h {
            out.h_gain[check(i)?] = g;
        }
        for (i, g) in ap {
            out.ap_gain[check(i)?] = g;
        }
        for (i, j, g) in x {
            out.x_gain[check(i)?][check(j)?] = g;
            out.x_gain[j][i] = g;
        }
        coefs.sort_by_key(|&(i, n, _)| (i, n));
        for (i, n, z) in coefs {
            let v = &mut out.ap_vec[check(i)?];
            if v.len() != n {
                return Err(Error::Replay(format!("WS{i}: antenna {n} out of order")));
            }
            v.push(z);
        }
        if out.h_gain.iter().chain(&out.ap_gain).any(|g| g.is_nan()) {
            return Err(Error::Replay("missing PS or AP link rows".into()));
        }
        Ok(out)
    }

    pub fn save_replay(&self, topo: Option<&Topology>, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_replay(topo))?;
        Ok(())
    }

    pub fn load_replay(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_replay(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_is_deterministic() {
        let p = SystemParams::uniform(4, 4);
        assert_eq!(
            sample_topology(7, &p).unwrap(),
            sample_topology(7, &p).unwrap()
        );
        assert_ne!(
            sample_topology(7, &p).unwrap(),
            sample_topology(8, &p).unwrap()
        );
    }

    #[test]
    fn single_ws_topology() {
        let topo = sample_topology(3, &SystemParams::uniform(1, 4)).unwrap();
        assert_eq!(topo.num_ws(), 1);
        assert!(topo.ps_distance(0) <= MAX_LINK_DISTANCE);
        assert!(topo.ap_distance(0) <= MAX_LINK_DISTANCE);
    }

    #[test]
    fn topology_bounds_hold() {
        for seed in 0..200 {
            let topo = sample_topology(seed, &SystemParams::uniform(8, 4)).unwrap();
            topo.check().unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    assert!(topo.ws_distance(i, j) <= MAX_WS_SPREAD + 1e-12);
                }
            }
        }
    }

    #[test]
    fn topology_prefix_is_stable_in_k() {
        let small = sample_topology(11, &SystemParams::uniform(3, 4)).unwrap();
        let large = sample_topology(11, &SystemParams::uniform(6, 4)).unwrap();
        assert_eq!(small.ws_positions[..], large.ws_positions[..3]);
    }

    #[test]
    fn channels_are_deterministic_and_consistent() {
        let p = SystemParams::uniform(4, 4);
        let topo = sample_topology(5, &p).unwrap();
        let a = sample_channels(9, &topo, &p).unwrap();
        let b = sample_channels(9, &topo, &p).unwrap();
        assert_eq!(a, b);
        for k in 0..4 {
            assert_eq!(a.ap_gain[k], squared_norm(&a.ap_vec[k]));
            assert!(a.h_gain[k] > 0.0 && a.ap_gain[k] > 0.0);
            assert_eq!(a.ap_vec[k].len(), 4);
            for j in 0..4 {
                assert_eq!(a.x_gain[k][j], a.x_gain[j][k]);
                if j != k {
                    assert!(a.x_gain[k][j] > 0.0);
                }
            }
        }
    }

    #[test]
    fn antenna_prefix_is_stable_in_n() {
        let p2 = SystemParams::uniform(3, 2);
        let p8 = SystemParams::uniform(3, 8);
        let topo = sample_topology(1, &p2).unwrap();
        let a = sample_channels(4, &topo, &p2).unwrap();
        let b = sample_channels(4, &topo, &p8).unwrap();
        for k in 0..3 {
            assert_eq!(a.ap_vec[k][..], b.ap_vec[k][..2]);
            assert!(b.ap_gain[k] >= a.ap_gain[k]);
        }
        assert_eq!(a.h_gain, b.h_gain);
    }

    #[test]
    fn path_loss_clamps_below_one_meter() {
        assert_eq!(path_loss(0.5), PATH_LOSS_REF);
        assert!((path_loss(10.0) - 1e-3 * 10f64.powf(-2.2)).abs() < 1e-18);
    }

    #[test]
    fn replay_round_trip_is_bit_exact() {
        let p = SystemParams::uniform(5, 3);
        let topo = sample_topology(21, &p).unwrap();
        let chan = sample_channels(22, &topo, &p).unwrap();
        let text = chan.to_replay(Some(&topo));
        let back = ChannelRealization::from_replay(&text).unwrap();
        assert_eq!(chan, back);
    }

    #[test]
    fn replay_rejects_garbage() {
        assert!(ChannelRealization::from_replay("link PS WSx 1 2").is_err());
        assert!(ChannelRealization::from_replay("hello").is_err());
        assert!(ChannelRealization::from_replay("link WS0 AP 1 2\n").is_err());
    }
}
