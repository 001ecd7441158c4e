use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use gsp_bench::{random, stokes, Fixture};
use gsp_core::baselines::{pgmres_solve, pminres_solve, scr_cg_solve, scr_fom_solve};
use gsp_core::craig::craig_solve;
use gsp_core::nscraig::nscraig_solve;
use gsp_core::{SaddleSystem, SolveResult, SolverConfig, SpdPreconditioner};

type SolveFn = fn(&SaddleSystem, &SpdPreconditioner, &SolverConfig) -> gsp_core::Result<SolveResult>;

fn run_group(c: &mut Criterion, group: &str, fixtures: &[Fixture], solvers: &[(&str, SolveFn)]) {
    let cfg = SolverConfig::default();
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    for f in fixtures {
        for (name, solve) in solvers {
            g.bench_with_input(BenchmarkId::new(*name, &f.name), f, |b, f| {
                b.iter(|| solve(&f.system, &f.preconditioner, &cfg).unwrap())
            });
        }
    }
    g.finish();
}

fn symmetric(c: &mut Criterion) {
    let fixtures = [random(400, 150, 0.0), stokes(16, false), stokes(32, false)];
    let solvers: [(&str, SolveFn); 3] = [("craig", craig_solve), ("scr-cg", scr_cg_solve), ("pminres", pminres_solve)];
    run_group(c, "symmetric", &fixtures, &solvers);
}

fn nonsymmetric(c: &mut Criterion) {
    let fixtures = [random(400, 150, 0.5), stokes(16, true), stokes(32, true)];
    let solvers: [(&str, SolveFn); 3] = [("nscraig", nscraig_solve), ("scr-fom", scr_fom_solve), ("pgmres", pgmres_solve)];
    run_group(c, "nonsymmetric", &fixtures, &solvers);
}

criterion_group!(benches, symmetric, nonsymmetric);
criterion_main!(benches);
