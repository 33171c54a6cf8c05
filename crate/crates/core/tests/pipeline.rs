//! End-to-end checks through the public API.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use starjam::ao::{baseline_woj, optimize};
use starjam::channels::gen_channels;
use starjam::system::{feasibility, link_metrics};
use starjam::{AoOptions, ChannelParams, Geometry, Mode, SystemParams};

#[test]
fn optimized_states_are_feasible_and_beat_woj() {
    let sys = SystemParams::default();
    let opts = AoOptions::default();
    for seed in 0..3 {
        let geom = Geometry { l: 16, ..Geometry::default() };
        let ch = gen_channels(&geom, &ChannelParams::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let woj = baseline_woj(&ch, &sys).secrecy;
        for mode in [Mode::Es, Mode::Ms] {
            let (st, trace) = optimize(mode, &ch, &sys, &opts, &mut ChaCha8Rng::seed_from_u64(100 + seed)).unwrap();
            assert!(feasibility(&ch, &st.ris, &st.bf, &sys).unwrap().ok());
            let again = link_metrics(&ch, &st.ris, &st.bf, &sys).unwrap();
            assert!((again.secrecy_raw - st.metrics.secrecy_raw).abs() < 1e-12);
            assert!(st.metrics.secrecy >= woj - 1e-9, "{mode} seed {seed}: {} < {woj}", st.metrics.secrecy);
            let seq = trace.accepted_sequence();
            assert!(seq.windows(2).all(|p| p[1] >= p[0] - 1e-12));
        }
    }
}

#[test]
fn same_seed_same_result() {
    let sys = SystemParams::default();
    let ch = gen_channels(&Geometry::default(), &ChannelParams::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let run = || optimize(Mode::Ms, &ch, &sys, &AoOptions::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap().0;
    let (a, b) = (run(), run());
    assert_eq!(a.bf.w, b.bf.w);
    assert_eq!(a.metrics.secrecy_raw.to_bits(), b.metrics.secrecy_raw.to_bits());
}
