use criterion::{black_box, criterion_group, criterion_main, Criterion};
use mpcrange::distance::{estimate_distance_mle, estimate_distance_noassoc, DeltaObservation};
use mpcrange::position::{estimate_position_by_delta, estimate_position_by_tau, DeltaMode, TauMode};
use mpcrange::rng::{substream, Purpose};
use mpcrange::{ChannelConfig, ChannelModel, ProjectionMode, Vec3};

fn bench_estimators(c: &mut Criterion) {
    let model = ChannelModel::new(ChannelConfig::default()).unwrap();
    let rel = Vec3::new(2.5, 0.0, 0.0);
    let scenario = model.sample_scenario(&rel, &mut substream(1, 0, 0, Purpose::Scenario)).unwrap();
    let obs = scenario.observation();
    let deltas = DeltaObservation::from_observation(&obs).unwrap();

    c.bench_function("sample_scenario", |b| {
        let mut rng = substream(1, 0, 1, Purpose::Scenario);
        b.iter(|| model.sample_scenario(black_box(&rel), &mut rng).unwrap())
    });
    c.bench_function("distance_mle", |b| b.iter(|| estimate_distance_mle(black_box(&deltas)).unwrap()));
    c.bench_function("distance_noassoc", |b| {
        b.iter(|| estimate_distance_noassoc(black_box(&obs), None).unwrap())
    });
    c.bench_function("position_lse_delta", |b| {
        b.iter(|| estimate_position_by_delta(black_box(&obs), &DeltaMode::Lse, ProjectionMode::Exact).unwrap())
    });
    c.bench_function("position_lse_tau", |b| {
        b.iter(|| estimate_position_by_tau(black_box(&obs), &TauMode::Joint).unwrap())
    });
}

criterion_group!(benches, bench_estimators);
criterion_main!(benches);
