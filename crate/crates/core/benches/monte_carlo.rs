use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use coarsen::clustering::{cluster_patients, ClusteringMethod};
use coarsen::experiment::{prepare_replications, simulate};
use coarsen::lp;
use coarsen::par::Execution;
use coarsen::policies::PolicySpec;
use coarsen::synth::{generate_instance, ArrivalMode, GeneratorConfig};

fn replications(c: &mut Criterion) {
    let mut cfg = GeneratorConfig::new(300, 12, 30, 150);
    cfg.noise_delta = 0.05;
    cfg.seed = 1;
    let (inst, _) = generate_instance(&cfg).unwrap();
    let clustering = cluster_patients(&inst, 10, ClusteringMethod::ConstrainedKmeans, 1).unwrap();
    let plan = lp::plan(&inst, Some(&clustering)).unwrap();
    let policies = [PolicySpec::csm(), PolicySpec::Greedy];

    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let name = if exec.is_parallel() { "parallel" } else { "sequential" };
        group.bench_with_input(BenchmarkId::new("prepare", name), &exec, |b, &exec| {
            b.iter(|| prepare_replications(&inst, &inst.weights, 32, 7, ArrivalMode::Poisson, exec))
        });
        let reps = prepare_replications(&inst, &inst.weights, 32, 7, ArrivalMode::Poisson, exec);
        group.bench_with_input(BenchmarkId::new("simulate", name), &exec, |b, &exec| {
            b.iter(|| simulate(&inst, &inst.weights, Some(&plan), &policies, &reps, 7, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, replications);
criterion_main!(benches);
