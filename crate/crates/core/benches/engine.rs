use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dle_core::bundles::Bundle;
use dle_core::classify::find_witness;
use dle_core::exec;
use dle_core::frames::{ComplexAlgebra, LEFrame, LATTICE_BOUND};
use dle_core::search::{decide, DEFAULT_BUDGET};
use dle_core::syntax::{parse_inequality, parse_sequent};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn modes() -> [(&'static str, bool); 2] {
    [("sequential", false), ("parallel", true)]
}

fn decision(c: &mut Criterion) {
    let mut g = c.benchmark_group("decide");
    let cases = [
        ("lg+grishin", "circ(p, bslcirc(r, q)) => star(slstar(p, r), q)"),
        ("ortho", "p & (q | r) => (p & q) | (p & r)"),
        ("fl-base+weakening", "circ(p, q & r) => circ(p, q) | r"),
    ];
    for (bundle, text) in cases {
        let calc = Bundle::load(bundle).unwrap().calculus();
        let goal = parse_sequent(text, &calc.sig).unwrap();
        for (mode, par) in modes() {
            exec::set_parallel(par);
            g.bench_with_input(BenchmarkId::new(mode, bundle), &goal, |b, goal| {
                b.iter(|| decide(goal, &calc, DEFAULT_BUDGET).unwrap())
            });
        }
    }
    g.finish();
}

fn witness(c: &mut Criterion) {
    let mut g = c.benchmark_group("find_witness");
    let b = Bundle::load("modal-epistemic").unwrap();
    let ineq = parse_inequality("box(dia(p | q)) & dia(r) <= dia(box(s & t)) | box(u)", &b.sig).unwrap();
    for (mode, par) in modes() {
        exec::set_parallel(par);
        g.bench_function(mode, |bch| bch.iter(|| find_witness(&ineq, &b.sig).unwrap()));
    }
    g.finish();
}

fn operator_laws(c: &mut Criterion) {
    let mut g = c.benchmark_group("operator_laws");
    let b = Bundle::load("lg").unwrap();
    let frame = LEFrame::random_stabilized(&b.sig, 5, 5, &mut ChaCha8Rng::seed_from_u64(3));
    let alg = ComplexAlgebra::new(&frame, LATTICE_BOUND).unwrap();
    for (mode, par) in modes() {
        exec::set_parallel(par);
        g.bench_function(mode, |bch| bch.iter(|| alg.operator_law_violations(&b.sig)));
    }
    g.finish();
}

criterion_group!(benches, decision, witness, operator_laws);
criterion_main!(benches);
