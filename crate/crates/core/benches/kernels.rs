//! Parallel vs sequential kernels.
//!
//! `cargo bench` measures the rayon build, both on the global pool and on a
//! one-thread pool; `cargo bench --no-default-features` measures the
//! sequential fallback under the same names.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use volgram::sde::{BenchS1, ZeroDrift};
use volgram::{
    bench_s2, credible_band, euler_simulate, fit, parallel, run_contraction, select, subsample, ContractionConfig,
    Criterion as BinCriterion, Norm, PriorSpec, SimConfig,
};

fn mode() -> &'static str {
    if parallel::is_parallel() {
        "parallel"
    } else {
        "sequential"
    }
}

/// Run `f` on the default pool and, in parallel builds, on one thread.
fn variants(c: &mut Criterion, group: &str, param: usize, f: &(dyn Fn() + Sync)) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    g.bench_with_input(BenchmarkId::new(mode(), param), &param, |b, _| b.iter(f));
    if parallel::is_parallel() {
        g.bench_with_input(BenchmarkId::new("parallel-1-thread", param), &param, |b, _| {
            b.iter(|| parallel::with_threads(1, f))
        });
    }
    g.finish();
}

fn sample_path(n: usize) -> volgram::ObservedPath {
    let sim = SimConfig { fine_grid_points: 160_001, ..SimConfig::with_seed(11) };
    let fine = euler_simulate(&sim, &ZeroDrift, &BenchS1).unwrap();
    subsample(&fine, n, 1.0).unwrap()
}

fn bench_contraction(c: &mut Criterion) {
    let mut cfg = ContractionConfig::desk(Arc::new(BenchS1), 1.0, Norm::L2, 1);
    cfg.sim.fine_grid_points = 160_001;
    cfg.n_list = vec![5_000, 10_000, 20_000, 40_000];
    cfg.draws = 500;
    cfg.realisations = 2;
    let prior = PriorSpec::simulation();
    variants(c, "contraction_l2", cfg.draws, &|| {
        black_box(run_contraction(&cfg, &prior).unwrap());
    });

    let s2 = bench_s2(&SimConfig { fine_grid_points: 160_001, ..SimConfig::with_seed(2) }).unwrap();
    let mut cfg2 = ContractionConfig::desk(Arc::new(s2), 0.5, Norm::Linf, 1);
    cfg2.sim.fine_grid_points = 160_001;
    cfg2.draws = 200;
    variants(c, "contraction_sup_s2", cfg2.draws, &|| {
        black_box(run_contraction(&cfg2, &prior).unwrap());
    });
}

fn bench_selection(c: &mut Criterion) {
    let path = sample_path(40_000);
    let grid = [5, 10, 20, 40, 80, 160, 320, 640, 1280];
    let prior = PriorSpec::simulation();
    variants(c, "select_dic", path.n(), &|| {
        black_box(select(&path, &grid, &prior, BinCriterion::Dic).unwrap());
    });
}

fn bench_band(c: &mut Criterion) {
    let path = sample_path(40_000);
    let post = fit(&path, 4_000, &PriorSpec::simulation()).unwrap();
    variants(c, "credible_band", post.bins(), &|| {
        black_box(credible_band(&post, 0.98).unwrap());
    });
}

criterion_group!(benches, bench_contraction, bench_selection, bench_band);
criterion_main!(benches);
