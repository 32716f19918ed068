use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ctmc_gsa::gsa::{build_pickfreeze, evaluate_design, PickFreezeDesign};
use ctmc_gsa::model::ModelGraph;
use ctmc_gsa::models::{build_seiarhd, seiarhd_initial_state, seiarhd_input_spec};
use ctmc_gsa::par::Execution;
use ctmc_gsa::rng::UniformStream;
use ctmc_gsa::sim::{simulate, RepresentationKind, SimOptions, StopRule};

const N: usize = 64;

fn setup(kind: RepresentationKind) -> (ModelGraph, PickFreezeDesign, SimOptions) {
    let model = build_seiarhd(2005, seiarhd_initial_state()).unwrap();
    let mut stream = UniformStream::from_seed(11).unwrap();
    let design = build_pickfreeze(
        &seiarhd_input_spec(),
        model.parameters(),
        kind.seed_slots(model.n_channels()),
        N,
        &mut stream,
    )
    .unwrap();
    let opts = SimOptions {
        stop: Some(StopRule {
            all_zero: ["E", "A", "I"].iter().map(|c| model.compartment(c).unwrap()).collect(),
            not_before: 60.0,
        }),
        ..SimOptions::default()
    };
    (model, design, opts)
}

fn design_evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("seiarhd_design");
    group.sample_size(10);
    for kind in [RepresentationKind::FirstReaction, RepresentationKind::Mnrm] {
        let (model, design, opts) = setup(kind);
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(BenchmarkId::new(kind.as_str(), format!("{exec:?}")), &exec, |b, &exec| {
                b.iter(|| {
                    evaluate_design(&design, exec, |row| {
                        let bound = model.bind(&row.theta);
                        simulate(kind, &bound, &row.seeds, &opts, &mut ()).map(|o| o.events)
                    })
                    .unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, design_evaluation);
criterion_main!(benches);
