//! Compares the rayon build on a one-thread pool against the default pool.
//! Build with `--no-default-features` to bench the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use salmanip_core::image::{gradients, rgb_to_lab};
use salmanip_core::patchdb::{PatchDatabase, Polarity, Thresholds};
use salmanip_core::poisson::{solve_screened_poisson, ScreenedPoissonProblem};
use salmanip_core::saliency::SaliencyConfig;
use salmanip_core::setup::{Label, SetupMask};
use salmanip_core::synthesis::{nn_search, vote, SynthesisConfig};
use salmanip_core::synthetic::scene;
use salmanip_core::{compute_saliency, run_manipulation, ManipulationConfig, Mask, Mode};

#[cfg(feature = "parallel")]
fn pools() -> Vec<(String, Option<rayon::ThreadPool>)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("rayon-1".into(), Some(one)), (format!("rayon-default-{}", rayon::current_num_threads()), None)]
}

#[cfg(not(feature = "parallel"))]
fn pools() -> Vec<(String, Option<()>)> {
    vec![("sequential".into(), None)]
}

#[cfg(feature = "parallel")]
fn on<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn on<R>(_: &Option<()>, f: impl FnOnce() -> R) -> R {
    f()
}

fn stages(c: &mut Criterion) {
    let sc = scene(0, 160);
    let lab = rgb_to_lab(&sc.image);
    let (w, h) = lab.dimensions();
    let all = Mask::from_fn(w, h, |_, _| true);
    let db = PatchDatabase { source: lab.clone(), valid: all.clone(), polarity: Polarity::Plus, threshold: 0.0, relaxed: false };
    let syn = SynthesisConfig::default();
    let field = nn_search(&lab, &all, &db, &syn, 0).unwrap();
    let setup = SetupMask::new(w, h, vec![Label::Increase; w * h]).unwrap();
    let problem = ScreenedPoissonProblem::new(lab.clone(), gradients(&lab), 5.0).unwrap();
    let small = scene(1, 96);
    let run_cfg = ManipulationConfig {
        pinned_thresholds: Some(Thresholds::new(0.3, 0.7)),
        max_db_iterations: 1,
        ..ManipulationConfig::default()
    };

    for (name, pool) in pools() {
        let mut g = c.benchmark_group("stages");
        g.sample_size(10);
        g.bench_function(BenchmarkId::new("saliency", &name), |b| {
            b.iter(|| on(&pool, || compute_saliency(&lab, &SaliencyConfig::default()).unwrap()))
        });
        g.bench_function(BenchmarkId::new("nn_search", &name), |b| {
            b.iter(|| on(&pool, || nn_search(&lab, &all, &db, &syn, 1).unwrap()))
        });
        g.bench_function(BenchmarkId::new("vote", &name), |b| {
            b.iter(|| on(&pool, || vote(&[(&field, &db)], &setup, &lab, &syn).unwrap()))
        });
        g.bench_function(BenchmarkId::new("poisson", &name), |b| {
            b.iter(|| on(&pool, || solve_screened_poisson(&problem, 1e-6).unwrap()))
        });
        g.bench_function(BenchmarkId::new("image_update", &name), |b| {
            b.iter(|| on(&pool, || run_manipulation(&small.image, &small.region, Mode::Enhance, &run_cfg).unwrap()))
        });
        g.finish();
    }
}

criterion_group!(benches, stages);
criterion_main!(benches);
