use cermec::channel::{
    sample_channels, sample_topology, ChannelRealization, MAX_LINK_DISTANCE, MIN_SEPARATION,
};
use cermec::params::SystemParams;
use cermec::specfun::{lambert_w0, rate_slope, rate_slope_inv};
use cermec::sysmodel::{combining_gain, mrc_vector, offload_bits};
use proptest::prelude::*;

proptest! {
    #[test]
    fn lambert_residual_is_tiny(x in -0.367_879f64..1e6) {
        let w = lambert_w0(x).unwrap();
        prop_assert!((w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1.0));
    }

    #[test]
    fn rate_slope_round_trips(y in 1e-8f64..50.0) {
        let x = rate_slope_inv(y).unwrap();
        prop_assert!(x >= 0.0);
        prop_assert!((rate_slope(x).unwrap() - y).abs() <= 1e-9 * y.max(1.0));
    }

    #[test]
    fn offload_bits_are_positively_homogeneous(t in 1e-4f64..1.0, e in 1e-9f64..1e-3, a in 0.1f64..10.0) {
        let p = SystemParams::default();
        let one = offload_bits(t, e, 1e-6, &p).unwrap();
        let scaled = offload_bits(a * t, a * e, 1e-6, &p).unwrap();
        prop_assert!((scaled - a * one).abs() <= 1e-9 * scaled.max(1.0));
    }

    #[test]
    fn topologies_respect_geometry(seed in any::<u64>(), k in 1usize..9) {
        let p = SystemParams::uniform(k, 2);
        let topo = sample_topology(seed, &p).unwrap();
        for i in 0..k {
            prop_assert!(topo.ps_distance(i) <= MAX_LINK_DISTANCE);
            prop_assert!(topo.ap_distance(i) <= MAX_LINK_DISTANCE);
            for j in 0..i {
                prop_assert!(topo.ws_distance(i, j) >= MIN_SEPARATION);
            }
        }
        let c = sample_channels(seed, &topo, &p).unwrap();
        prop_assert_eq!(&c, &sample_channels(seed, &topo, &p).unwrap());
        for i in 0..k {
            prop_assert_eq!(c.x_gain[i][i], 0.0);
            let w = mrc_vector(&c.ap_vec[i]).unwrap();
            prop_assert!((combining_gain(&w, &c.ap_vec[i]) - c.ap_gain[i]).abs() <= 1e-12 * c.ap_gain[i]);
        }
    }
}

#[test]
fn replay_round_trips_through_a_file() {
    let p = SystemParams::uniform(3, 2);
    let topo = sample_topology(12, &p).unwrap();
    let c = sample_channels(12, &topo, &p).unwrap();
    let file = tempfile::NamedTempFile::new().unwrap();
    c.save_replay(Some(&topo), file.path()).unwrap();
    assert_eq!(ChannelRealization::load_replay(file.path()).unwrap(), c);
}
