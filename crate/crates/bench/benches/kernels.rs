use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use num_rational::Rational64;
use std::hint::black_box;

use memulsion_core::column::{psi_quenched_column, ColumnDisorder, ColumnType};
use memulsion_core::disorder::{Letter, MicroDisorder};
use memulsion_core::field::BlockField;
use memulsion_core::interface::{interface_log_partition, InterfaceSpec};
use memulsion_core::lattice::{count_crossings_dp, CountSweep, CrossingSpec};
use memulsion_core::simulate::{full_log_partition, ModelInstance, SimOptions};
use memulsion_core::solver::{solve_ratio, PsiCurve, PsiTable};
use memulsion_core::FrequencyMeasure;

fn bench_counts(c: &mut Criterion) {
    let spec = CrossingSpec::from_counts(6, 24, 0).unwrap();
    c.bench_function("count_crossings_dp L6 u4", |b| {
        b.iter(|| count_crossings_dp(black_box(&spec), None).unwrap())
    });
    c.bench_function("count_sweep L8 to 48 steps", |b| {
        b.iter(|| CountSweep::build(black_box(8), black_box(48)))
    });
}

fn bench_interface(c: &mut Criterion) {
    let spec = InterfaceSpec::from_counts(8, 24, 2.0, 1.0).unwrap();
    let omega = MicroDisorder::sample(24, 1, 0);
    c.bench_function("interface_log_partition L8 mu3", |b| {
        b.iter(|| interface_log_partition(black_box(&omega), black_box(&spec)).unwrap())
    });
}

fn bench_column(c: &mut Criterion) {
    let letters: Vec<Letter> = (-4..=4)
        .map(|j| if j >= 1 { Letter::B } else { Letter::A })
        .collect();
    let theta = ColumnType::new(
        ColumnDisorder::from_window(letters).unwrap(),
        2,
        Rational64::new(1, 2),
        Rational64::new(1, 2),
        1,
    )
    .unwrap();
    let omega = MicroDisorder::sample(16, 2, 0);
    c.bench_function("psi_quenched_column L4 u4", |b| {
        b.iter(|| {
            psi_quenched_column(
                black_box(&omega),
                black_box(&theta),
                Rational64::from_integer(4),
                4,
                2.0,
                1.0,
            )
            .unwrap()
        })
    });
}

fn bench_solver(c: &mut Criterion) {
    let curves = vec![
        PsiCurve::from_fn(1.0, 4.0, 65, |u| Ok(0.5 - 0.06 * (u - 2.0) * (u - 2.0))).unwrap(),
        PsiCurve::from_fn(1.5, 4.0, 65, |u| Ok(0.2 + 0.25 / u)).unwrap(),
        PsiCurve::from_fn(2.0, 4.0, 65, |u| Ok(0.1 + 0.3 / u)).unwrap(),
    ];
    let atoms = memulsion_core::check::random_columns(3, 1, 8)
        .into_iter()
        .zip([0.3, 0.4, 0.3])
        .map(|((t, _, _), w)| (t, w))
        .collect();
    let rho = FrequencyMeasure {
        atoms,
        support_cap: (1, 4),
    };
    let table = PsiTable::from_curves(curves, 2.0, 1.0);
    c.bench_function("solve_ratio 3 atoms", |b| {
        b.iter(|| solve_ratio(black_box(&rho), black_box(&table), 1e-8, 200).unwrap())
    });
}

fn bench_full_model(c: &mut Criterion) {
    let field = BlockField::sample(0.5, 24, 24, 3).unwrap();
    c.bench_function("full_log_partition n24 L2", |b| {
        b.iter_batched(
            || ModelInstance {
                n: 24,
                block_size: 2,
                m_cap: 1,
                alpha: 2.0,
                beta: 1.0,
                omega: MicroDisorder::sample(24, 4, 0),
                field: field.clone(),
            },
            |inst| full_log_partition(black_box(&inst), &SimOptions::default()).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(
    benches,
    bench_counts,
    bench_interface,
    bench_column,
    bench_solver,
    bench_full_model
);
criterion_main!(benches);
