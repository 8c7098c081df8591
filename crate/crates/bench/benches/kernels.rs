use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use specgap::{inertia, sample_gap, smallest_eigenvalues, SurveyConfig, SurveyOptions};
use specgap_bench::Fixture;

fn bench_inertia(c: &mut Criterion) {
    let mut group = c.benchmark_group("inertia");
    for cells in [64, 256, 1024] {
        let f = Fixture::affine(cells);
        group.throughput(Throughput::Elements(cells as u64));
        group.bench_with_input(BenchmarkId::from_parameter(cells), &f, |b, f| {
            b.iter(|| inertia(&f.stiffness, &f.mass, black_box(30.0)))
        });
    }
    group.finish();
}

fn bench_eigenvalues(c: &mut Criterion) {
    let mut group = c.benchmark_group("smallest_eigenvalues");
    for cells in [64, 256] {
        let f = Fixture::affine(cells);
        let bracket = f.bracket();
        group.bench_with_input(BenchmarkId::from_parameter(cells), &f, |b, f| {
            b.iter(|| smallest_eigenvalues(&f.stiffness, &f.mass, 2, bracket, &f.tol))
        });
    }
    group.finish();
}

fn bench_assembly(c: &mut Criterion) {
    let f = Fixture::affine(64);
    c.bench_function("assemble_stiffness/64", |b| {
        b.iter(|| f.assembler.assemble(black_box(&f.y)))
    });
}

fn bench_lattice(c: &mut Criterion) {
    let f = Fixture::affine(64);
    let mut i = 0u64;
    c.bench_function("lattice_point/s100", |b| {
        b.iter(|| {
            i = (i + 1) & 0xffff;
            f.lattice.lattice_point(black_box(i))
        })
    });
}

fn bench_sample(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_gap");
    for (name, f) in [
        ("affine", Fixture::affine(64)),
        ("log_normal", Fixture::log_normal(64)),
    ] {
        group.bench_function(name, |b| b.iter(|| f.sampler.sample(0, black_box(&f.y))));
    }
    let f = Fixture::affine(64);
    group.bench_function("one_shot", |b| {
        b.iter(|| sample_gap(&f.model, &f.mesh, black_box(&f.y), &f.tol))
    });
    group.finish();
}

fn bench_survey(c: &mut Criterion) {
    let f = Fixture::affine(64);
    let config = SurveyConfig {
        model: f.model,
        mesh_cells: 64,
        generating_vector: f.lattice.generating_vector().to_vec(),
        genvec_source: "bench".into(),
        m_max: 8,
        shift: f.lattice.shift_spec(),
        solver: f.tol,
        quadrature: Default::default(),
        residual_audit: false,
        fail_policy: None,
    };
    let options = SurveyOptions {
        workers: Some(1),
        keep_samples: false,
    };
    let mut group = c.benchmark_group("survey");
    group.sample_size(10);
    group.throughput(Throughput::Elements(256));
    group.bench_function("m8_serial", |b| {
        b.iter(|| specgap::run_survey(&config, &options))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_inertia,
    bench_eigenvalues,
    bench_assembly,
    bench_lattice,
    bench_sample,
    bench_survey
);
criterion_main!(benches);
