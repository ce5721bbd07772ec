// cargo bench -p oprange-bench

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use oprange_bench::{robot, rough_profile, scenario};
use oprange_core::generalized::{solve_range_implicit, OnlineEstimatorState, Pace};
use oprange_core::simplified::{max_range, SimplifiedMission};
use oprange_core::{simulator, telemetry, AncillaryPowerModel, BatteryModel};

fn closed_form(c: &mut Criterion) {
    let r = robot();
    let b = BatteryModel::fresh(5e4);
    let a = AncillaryPowerModel::constant(4.0);
    let m = SimplifiedMission::at_speed(0.05, 1.0, 0.8);
    c.bench_function("max_range", |bch| {
        bch.iter(|| max_range(black_box(&r), &b, &a, black_box(&m)))
    });
}

fn implicit(c: &mut Criterion) {
    let r = robot();
    let b = BatteryModel::fresh(5e3);
    let a = AncillaryPowerModel::constant(4.0);
    let p = rough_profile(1000);
    let pace = Pace::new(1.0, 0.8).unwrap();
    c.bench_function("solve_range_implicit 1000 m profile", |bch| {
        bch.iter(|| solve_range_implicit(&r, &b, &a, black_box(&p), pace))
    });
}

fn simulate_and_replay(c: &mut Criterion) {
    let s = scenario(3e3);
    c.bench_function("simulator run", |bch| bch.iter(|| simulator::run(black_box(&s))));

    let result = simulator::run(&s).unwrap();
    let rows = black_box(&result.telemetry);
    c.bench_function("replay", |bch| {
        bch.iter(|| {
            telemetry::replay(
                rows.iter().copied().map(Ok),
                OnlineEstimatorState::default(),
                &s.battery,
            )
        })
    });
}

criterion_group!(benches, closed_form, implicit, simulate_and_replay);
criterion_main!(benches);
