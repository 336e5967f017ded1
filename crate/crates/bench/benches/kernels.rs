use criterion::{criterion_group, criterion_main, Criterion};
use figr_core::{Array, Graph};
use std::hint::black_box;

fn ramp(shape: &[usize]) -> Array<f32> {
    let n: usize = shape.iter().product();
    Array::new(shape.to_vec(), (0..n).map(|i| ((i * 37 % 101) as f32 / 50.5) - 1.0).collect()).unwrap()
}

fn conv(c: &mut Criterion) {
    let x = ramp(&[4, 16, 16, 16]);
    let w = ramp(&[16, 16, 3, 3]);
    c.bench_function("conv3x3 16ch 16x16 b4 forward", |b| {
        b.iter(|| {
            let mut g = Graph::new();
            let xv = g.constant(x.clone());
            let wv = g.constant(w.clone());
            black_box(g.conv2d(xv, wv, 1).unwrap());
        })
    });
    c.bench_function("conv3x3 16ch 16x16 b4 forward+backward", |b| {
        b.iter(|| {
            let mut g = Graph::new();
            let xv = g.param(x.clone());
            let wv = g.param(w.clone());
            let y = g.conv2d(xv, wv, 1).unwrap();
            let l = g.sum(y);
            black_box(g.backward(l, false).unwrap());
        })
    });
}

fn matmul(c: &mut Criterion) {
    let a = ramp(&[64, 512]);
    let w = ramp(&[512, 256]);
    c.bench_function("matmul 64x512x256", |b| {
        b.iter(|| {
            let mut g = Graph::new();
            let av = g.constant(a.clone());
            let wv = g.constant(w.clone());
            black_box(g.matmul(av, wv).unwrap());
        })
    });
}

criterion_group!(benches, conv, matmul);
criterion_main!(benches);
