use ctmc_gsa::model::{ParameterPoint, State};
use ctmc_gsa::models::{
    build_competing, build_constant_rate, build_pure_death, build_seiarhd, build_sir, seiarhd_initial_state,
    seiarhd_nominal,
};
use ctmc_gsa::par::{try_map_indexed, Execution};
use ctmc_gsa::rng::{SeedVector, UniformStream};
use ctmc_gsa::sim::{
    sample_path, simulate, trajectory, PathObserver, RepresentationKind, SimError, SimOptions, StopRule,
    TerminalReason,
};
use ctmc_gsa::stats::{ks_one_sample, mean, variance};
use ctmc_gsa::study::ExtinctionClock;
use proptest::prelude::*;

fn seed_batch(seed: u64, runs: usize, slots: usize) -> Vec<SeedVector> {
    let mut master = UniformStream::from_seed(seed).unwrap();
    (0..runs).map(|_| SeedVector::draw(&mut master, slots)).collect()
}

struct FirstChannel(Option<usize>);

impl PathObserver for FirstChannel {
    fn jump(&mut self, _: f64, channel: usize, _: &[u32]) {
        self.0.get_or_insert(channel);
    }
}

/// Stops right after the first jump.
fn one_step() -> SimOptions {
    SimOptions {
        stop: Some(StopRule {
            all_zero: Vec::new(),
            not_before: f64::MIN_POSITIVE,
        }),
        ..SimOptions::default()
    }
}

#[test]
fn competing_clocks_split_by_rate() {
    let model = build_competing(1).unwrap();
    let (a, b) = (1.5, 0.5);
    let theta = ParameterPoint::from_named(&model, [("a", a), ("b", b)]).unwrap();
    let bound = model.bind(&theta);
    let runs = 100_000;
    for kind in RepresentationKind::ALL {
        let seeds = seed_batch(17, runs, kind.seed_slots(2));
        let firsts = try_map_indexed(Execution::Parallel, runs, |k| {
            let mut obs = FirstChannel(None);
            simulate(kind, &bound, &seeds[k], &SimOptions::default(), &mut obs)?;
            Ok::<_, SimError>(obs.0.unwrap())
        })
        .unwrap();
        let share = firsts.iter().filter(|&&c| c == 0).count() as f64 / runs as f64;
        assert!((share - a / (a + b)).abs() < 0.01, "{kind}: {share}");
    }
}

#[test]
fn sojourns_are_exponential() {
    let model = build_constant_rate(200_000).unwrap();
    let rate = 2.0;
    let theta = ParameterPoint::from_named(&model, [("rate", rate)]).unwrap();
    let n = 100_000;
    for kind in RepresentationKind::ALL {
        let seeds = seed_batch(23, 1, kind.seed_slots(1));
        let traj = trajectory(kind, &model, &theta, &seeds[0], &SimOptions::until(n as f64 / rate * 1.2)).unwrap();
        assert!(traj.n_jumps() > n);
        let gaps: Vec<f64> = std::iter::once(traj.jump_times[0])
            .chain(traj.jump_times.windows(2).map(|w| w[1] - w[0]))
            .take(n)
            .collect();
        let p = ks_one_sample(&gaps, |x| 1.0 - (-rate * x).exp());
        assert!(p >= 0.01, "{kind}: p = {p}");
    }
}

#[test]
fn embedded_chain_matches_rate_ratio() {
    let sir = build_sir(100, 5).unwrap().with_initial_state(State(vec![60, 30, 10])).unwrap();
    let theta = ParameterPoint::from_named(&sir, [("beta", 2.0), ("gamma_I", 1.0)]).unwrap();
    let bound = sir.bind(&theta);
    // infection 2/100 * 30 * 60 = 36, recovery 30
    let p = 36.0 / 66.0;
    let steps = 100_000;
    let se = (p * (1.0 - p) / steps as f64).sqrt();
    for kind in RepresentationKind::ALL {
        let seeds = seed_batch(29, steps, kind.seed_slots(2));
        let firsts = try_map_indexed(Execution::Parallel, steps, |k| {
            let mut obs = FirstChannel(None);
            let out = simulate(kind, &bound, &seeds[k], &one_step(), &mut obs)?;
            assert_eq!(out.events, 1);
            Ok::<_, SimError>(obs.0.unwrap())
        })
        .unwrap();
        let share = firsts.iter().filter(|&&c| c == 0).count() as f64 / steps as f64;
        assert!((share - p).abs() < 3.0 * se, "{kind}: {share} vs {p}");
    }
}

#[test]
fn seiarhd_extinction_means_agree_between_first_reaction_and_mnrm() {
    let model = build_seiarhd(2005, seiarhd_initial_state()).unwrap();
    let theta = seiarhd_nominal(&model);
    let bound = model.bind(&theta);
    let predicate: Vec<_> = ["E", "A", "I"].iter().map(|c| model.compartment(c).unwrap()).collect();
    let opts = SimOptions {
        stop: Some(StopRule::extinction(predicate.clone())),
        ..SimOptions::default()
    };
    let runs = 10_000;
    let sample = |kind: RepresentationKind, seed| {
        let seeds = seed_batch(seed, runs, kind.seed_slots(model.n_channels()));
        try_map_indexed(Execution::Parallel, runs, |k| {
            let mut clock = ExtinctionClock::new(&predicate);
            simulate(kind, &bound, &seeds[k], &opts, &mut clock)?;
            Ok::<_, SimError>(clock.time().unwrap())
        })
        .unwrap()
    };
    let fr = sample(RepresentationKind::FirstReaction, 31);
    let mn = sample(RepresentationKind::Mnrm, 37);
    let se = (variance(&fr) / runs as f64 + variance(&mn) / runs as f64).sqrt();
    assert!((mean(&fr) - mean(&mn)).abs() < 2.0 * se, "{} vs {} (se {se})", mean(&fr), mean(&mn));
}

#[test]
fn sir_mean_final_size_agrees_between_direct_and_mnrm() {
    let sir = build_sir(100, 5).unwrap();
    let theta = ParameterPoint::from_named(&sir, [("beta", 2.0), ("gamma_I", 1.0)]).unwrap();
    let r = sir.compartment("R").unwrap().0;
    let runs = 10_000;
    let sample = |kind: RepresentationKind, seed| -> Vec<f64> {
        seed_batch(seed, runs, kind.seed_slots(2))
            .iter()
            .map(|s| f64::from(trajectory(kind, &sir, &theta, s, &SimOptions::default()).unwrap().final_state().0[r]))
            .collect()
    };
    let direct = sample(RepresentationKind::DirectSingleStream, 41);
    let mn = sample(RepresentationKind::Mnrm, 43);
    let se = (variance(&direct) / runs as f64 + variance(&mn) / runs as f64).sqrt();
    assert!((mean(&direct) - mean(&mn)).abs() < 2.0 * se);
}

#[test]
fn pure_death_sampled_on_a_grid() {
    let model = build_pure_death(10).unwrap();
    let theta = ParameterPoint::from_named(&model, [("gamma", 1.0)]).unwrap();
    let seeds = seed_batch(47, 1, 1);
    let traj = trajectory(RepresentationKind::Mnrm, &model, &theta, &seeds[0], &SimOptions::default()).unwrap();
    assert_eq!(traj.terminal, TerminalReason::Absorbed);
    assert_eq!(traj.n_jumps(), 10);
    let path = sample_path(&traj, &[0.0, traj.jump_times[0], 1e9]);
    assert_eq!(path[0].0, vec![10, 0]);
    assert_eq!(path[1].0, vec![9, 1]);
    assert_eq!(path[2].0, vec![0, 10]);
}

fn any_kind() -> impl Strategy<Value = RepresentationKind> {
    prop::sample::select(RepresentationKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paths_conserve_population_and_move_one_individual(
        kind in any_kind(),
        seed in 1u64..1_000_000_000,
        beta in 0.5f64..4.0,
        gamma in 0.2f64..2.0,
        infected in 1u32..20,
    ) {
        let sir = build_sir(50, infected).unwrap();
        let theta = ParameterPoint::from_values(vec![beta, gamma]);
        let seeds = seed_batch(seed, 1, kind.seed_slots(2));
        let traj = trajectory(kind, &sir, &theta, &seeds[0], &SimOptions::until(30.0)).unwrap();
        prop_assert_eq!(traj.states.len(), traj.jump_times.len() + 1);
        prop_assert!(traj.jump_times.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(traj.jump_times.first().is_none_or(|&t| t > 0.0));
        for s in &traj.states {
            prop_assert_eq!(s.total(), 50);
        }
        for (w, &ch) in traj.states.windows(2).zip(&traj.channels) {
            let c = &sir.channels()[ch];
            let mut expected = w[0].clone();
            expected.apply(c).unwrap();
            prop_assert_eq!(&expected, &w[1]);
        }
    }

    #[test]
    fn replay_is_bit_identical(kind in any_kind(), seed in 1u64..1_000_000_000) {
        let model = build_seiarhd(1_000, State(vec![990, 5, 0, 5, 0, 0, 0])).unwrap();
        let theta = seiarhd_nominal(&model);
        let seeds = seed_batch(seed, 1, kind.seed_slots(model.n_channels()));
        let a = trajectory(kind, &model, &theta, &seeds[0], &SimOptions::until(40.0)).unwrap();
        let b = trajectory(kind, &model, &theta, &seeds[0], &SimOptions::until(40.0)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn horizon_cuts_a_prefix(kind in any_kind(), seed in 1u64..1_000_000_000, horizon in 0.5f64..10.0) {
        let sir = build_sir(50, 3).unwrap();
        let theta = ParameterPoint::from_values(vec![2.0, 1.0]);
        let seeds = seed_batch(seed, 1, kind.seed_slots(2));
        let full = trajectory(kind, &sir, &theta, &seeds[0], &SimOptions::default()).unwrap();
        let cut = trajectory(kind, &sir, &theta, &seeds[0], &SimOptions::until(horizon)).unwrap();
        let k = cut.n_jumps();
        prop_assert_eq!(&full.jump_times[..k], &cut.jump_times[..]);
        prop_assert_eq!(&full.states[..=k], &cut.states[..]);
        prop_assert!(full.jump_times.get(k).is_none_or(|&t| t > horizon));
    }
}
