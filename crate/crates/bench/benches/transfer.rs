use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use reslab_core::abelian::AbelianQuotient;
use reslab_core::cayley::{cheeger_constant, laplacian_eigenvalues, CayleyGraph};
use reslab_core::explicit_formula::build_test_function;
use reslab_core::thermo::critical_exponent;
use reslab_core::transfer::{assemble, determinant, fredholm_det};
use reslab_core::zeros::euler_product;
use reslab_core::{Complex64, SchottkyData, TwistSpec};

fn transfer(c: &mut Criterion) {
    let data = SchottkyData::preset("sl2z-pair").unwrap();
    let s = Complex64::new(0.8, 1.1);
    let mut g = c.benchmark_group("transfer");
    g.sample_size(20);
    for lmax in [16, 32, 64] {
        g.bench_with_input(BenchmarkId::new("assemble", lmax), &lmax, |b, &l| {
            b.iter(|| assemble(&data, black_box(s), &TwistSpec::Trivial, l).unwrap())
        });
        let m = assemble(&data, s, &TwistSpec::Trivial, lmax).unwrap();
        g.bench_with_input(BenchmarkId::new("fredholm_det", lmax), &m, |b, m| b.iter(|| fredholm_det(black_box(m))));
    }
    let q = AbelianQuotient::new(vec![3, 2]).unwrap();
    let reg = q.regular_twist().unwrap();
    g.bench_function("regular_twist_order6_lmax16", |b| b.iter(|| determinant(&data, black_box(s), &reg, 16).unwrap()));
    g.finish();
}

fn euler(c: &mut Criterion) {
    let data = SchottkyData::preset("symmetric3(0.25)").unwrap();
    let delta = critical_exponent(&data, 32, 1e-12).unwrap();
    let s = Complex64::new(delta + 1.0, 3.0);
    c.bench_function("euler_product_depth8", |b| {
        b.iter(|| euler_product(&data, black_box(s), &TwistSpec::Trivial, 8, 20, delta).unwrap())
    });
}

fn cayley(c: &mut Criterion) {
    let big = CayleyGraph::cycle(1024).unwrap();
    c.bench_function("cayley_spectrum_z1024", |b| b.iter(|| laplacian_eigenvalues(black_box(&big))));
    let small = CayleyGraph::cycle(20).unwrap();
    let mut g = c.benchmark_group("cayley");
    g.sample_size(10);
    g.bench_function("cheeger_exhaustive_z20", |b| b.iter(|| cheeger_constant(black_box(&small)).unwrap()));
    g.finish();
}

fn test_function(c: &mut Criterion) {
    let mut g = c.benchmark_group("explicit_formula");
    g.sample_size(10);
    g.bench_function("build_test_function_j12", |b| b.iter(|| build_test_function(black_box(0.5), 12, 4097).unwrap()));
    g.finish();
}

criterion_group!(benches, transfer, euler, cayley, test_function);
criterion_main!(benches);
