use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::Rng as _;

use mogan_core::model::{Generator, GeneratorConfig};
use mogan_core::motion::compute_template;
use mogan_core::rng::{stream, Rng, Stream};
use mogan_core::tensor::kernels::gemm_nn;
use mogan_core::tensor::{Tape, Tensor};
use mogan_core::{GrayImage, TemplateConfig};

fn random(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen::<f32>()).collect()).unwrap()
}

fn gemm(c: &mut Criterion) {
    let mut rng = stream(1, Stream::Check);
    let (m, n, k) = (64, 1024, 128);
    let a = random(&mut rng, &[m, k]);
    let b = random(&mut rng, &[k, n]);
    let mut out = vec![0.0f32; m * n];
    c.bench_function("gemm 64x128x1024", |bench| {
        bench.iter(|| {
            out.iter_mut().for_each(|v| *v = 0.0);
            gemm_nn(m, n, k, a.data(), b.data(), &mut out);
            black_box(&out);
        })
    });
}

fn conv(c: &mut Criterion) {
    let mut rng = stream(2, Stream::Check);
    let x = random(&mut rng, &[4, 16, 32, 32]);
    let w = random(&mut rng, &[32, 16, 4, 4]);
    c.bench_function("conv2d forward+backward 4x16x32x32", |bench| {
        bench.iter(|| {
            let tape = Tape::new();
            let (xv, wv) = (tape.leaf(x.clone()), tape.leaf(w.clone()));
            let y = xv.conv2d(wv, 2, 1).unwrap().sum();
            black_box(tape.backward(y).unwrap());
        })
    });
}

fn generator(c: &mut Criterion) {
    let config = GeneratorConfig {
        heads: 2,
        base_channels: 8,
        resolution: 64,
    };
    let gen = Generator::<f32>::new(config, &mut stream(3, Stream::Init)).unwrap();
    let x = random(&mut stream(3, Stream::Check), &[4, 1, 64, 64]);
    c.bench_function("generator forward batch 4", |bench| {
        bench.iter(|| black_box(gen.predict(&x).unwrap()))
    });
}

fn template(c: &mut Criterion) {
    let mut rng = stream(4, Stream::Check);
    let frames: Vec<GrayImage> = (0..5)
        .map(|_| GrayImage::new(64, 64, (0..64 * 64).map(|_| rng.gen()).collect()).unwrap())
        .collect();
    let cfg = TemplateConfig::for_clip(5);
    c.bench_function("motion template 5x64x64", |bench| {
        bench.iter(|| black_box(compute_template(&frames, &cfg).unwrap()))
    });
}

criterion_group!(benches, gemm, conv, generator, template);
criterion_main!(benches);
