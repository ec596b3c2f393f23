//! Convolution and transposed convolution against direct loop definitions.

use mogan_core::rng::{stream_with, Stream};
use mogan_core::tensor::{Tape, Tensor};
use rand::Rng as _;

fn random(shape: &[usize], salt: u64) -> Tensor<f64> {
    let mut rng = stream_with(11, Stream::Check, salt);
    let n: usize = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
    let (n, c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (o, k) = (w.shape()[0], w.shape()[2]);
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; n * o * oh * ow];
    for b in 0..n {
        for oc in 0..o {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut acc = 0.0;
                    for ic in 0..c {
                        for ki in 0..k {
                            for kj in 0..k {
                                let iy = (y * stride + ki) as isize - pad as isize;
                                let ix = (xx * stride + kj) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                acc += x.data()
                                    [((b * c + ic) * h + iy as usize) * wd + ix as usize]
                                    * w.data()[((oc * c + ic) * k + ki) * k + kj];
                            }
                        }
                    }
                    out[((b * o + oc) * oh + y) * ow + xx] = acc;
                }
            }
        }
    }
    Tensor::new(vec![n, o, oh, ow], out).unwrap()
}

fn naive_conv_transpose(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    stride: usize,
    pad: usize,
) -> Tensor<f64> {
    let (n, c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (o, k) = (w.shape()[1], w.shape()[2]);
    let oh = (h - 1) * stride + k - 2 * pad;
    let ow = (wd - 1) * stride + k - 2 * pad;
    let mut out = vec![0.0; n * o * oh * ow];
    for b in 0..n {
        for ic in 0..c {
            for y in 0..h {
                for xx in 0..wd {
                    let v = x.data()[((b * c + ic) * h + y) * wd + xx];
                    for oc in 0..o {
                        for ki in 0..k {
                            for kj in 0..k {
                                let oy = (y * stride + ki) as isize - pad as isize;
                                let ox = (xx * stride + kj) as isize - pad as isize;
                                if oy < 0 || ox < 0 || oy >= oh as isize || ox >= ow as isize {
                                    continue;
                                }
                                out[((b * o + oc) * oh + oy as usize) * ow + ox as usize] +=
                                    v * w.data()[((ic * o + oc) * k + ki) * k + kj];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, o, oh, ow], out).unwrap()
}

fn assert_close(a: &Tensor<f64>, b: &Tensor<f64>) {
    assert_eq!(a.shape(), b.shape());
    for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
        assert!((x - y).abs() < 1e-12, "element {i}: {x} vs {y}");
    }
}

#[test]
fn conv2d_matches_direct_loops() {
    for (shape, wshape, stride, pad) in [
        ([2, 3, 9, 7], [4, 3, 3, 3], 1, 1),
        ([1, 2, 8, 8], [3, 2, 4, 4], 2, 1),
        ([2, 1, 16, 16], [2, 1, 4, 4], 2, 1),
    ] {
        let x = random(&shape, 1);
        let w = random(&wshape, 2);
        let tape = Tape::new();
        let y = tape
            .leaf(x.clone())
            .conv2d(tape.leaf(w.clone()), stride, pad)
            .unwrap();
        assert_close(&y.value(), &naive_conv(&x, &w, stride, pad));
    }
}

#[test]
fn conv_transpose2d_matches_direct_loops() {
    for (shape, wshape, stride, pad) in [
        ([2, 3, 4, 4], [3, 2, 4, 4], 2, 1),
        ([1, 2, 5, 3], [2, 3, 3, 3], 1, 1),
        ([1, 4, 8, 8], [4, 1, 4, 4], 2, 1),
    ] {
        let x = random(&shape, 3);
        let w = random(&wshape, 4);
        let tape = Tape::new();
        let y = tape
            .leaf(x.clone())
            .conv_transpose2d(tape.leaf(w.clone()), stride, pad)
            .unwrap();
        assert_close(&y.value(), &naive_conv_transpose(&x, &w, stride, pad));
    }
}
