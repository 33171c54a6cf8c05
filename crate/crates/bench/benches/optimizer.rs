use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use starjam::ao::{initialize, optimize};
use starjam::channels::gen_channels;
use starjam::mode::{lift_mode_problem, lifted_vector};
use starjam::sca::build_w_problem;
use starjam::solver::{solve, solve_sdr};
use starjam::{AoOptions, ChannelParams, ChannelSet, Geometry, Mode, RisConfig, SystemParams};

fn channels(l: usize, seed: u64) -> ChannelSet {
    let geom = Geometry { l, ..Geometry::default() };
    gen_channels(&geom, &ChannelParams::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn transmit_subproblem(c: &mut Criterion) {
    let sys = SystemParams::default();
    let opts = AoOptions::default();
    for l in [16, 64] {
        let ch = channels(l, 1);
        let st = initialize(Mode::Es, &ch, &sys, &mut ChaCha8Rng::seed_from_u64(2), &opts).unwrap();
        let problem = build_w_problem(&ch, &st.ris, &st.bf, &sys).unwrap();
        c.bench_function(&format!("w_subproblem_L{l}"), |b| {
            b.iter(|| solve(&problem, &st.bf.w, &opts.solver_opts).unwrap())
        });
    }
}

fn mode_relaxation(c: &mut Criterion) {
    let sys = SystemParams::default();
    let opts = AoOptions::default();
    for l in [16, 36] {
        let ch = channels(l, 3);
        let st = initialize(Mode::Ms, &ch, &sys, &mut ChaCha8Rng::seed_from_u64(4), &opts).unwrap();
        let RisConfig::Ms(ms) = &st.ris else { unreachable!() };
        let sdr = lift_mode_problem(&ch, &st.bf, ms, &sys).unwrap();
        let x_bar = lifted_vector(&ms.a);
        c.bench_function(&format!("mode_sdr_L{l}"), |b| b.iter(|| solve_sdr(&sdr, &x_bar, &opts.solver_opts).unwrap()));
    }
}

fn full_ao(c: &mut Criterion) {
    let sys = SystemParams::default();
    let opts = AoOptions::default();
    let ch = channels(16, 5);
    let mut group = c.benchmark_group("ao_L16");
    group.sample_size(10);
    for mode in [Mode::Es, Mode::Ms] {
        group.bench_function(mode.to_string(), |b| {
            b.iter_batched(
                || ChaCha8Rng::seed_from_u64(6),
                |mut rng| optimize(mode, &ch, &sys, &opts, &mut rng).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, transmit_subproblem, mode_relaxation, full_ao);
criterion_main!(benches);
