//! Dense kernels. Every reduction runs in a fixed order so results are
//! bit-reproducible on a single thread.

use super::value::Element;

/// Geometry of a 2-D convolution over one image.
///
/// `in_*` is the padded-convolution input, `out_*` its output. For a
/// transposed convolution the roles swap: its output is `in_*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Output extent of a strided, padded convolution, if positive.
pub fn conv_out(size: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = size + 2 * pad;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Unfolds patches into a `[C*k*k, out_h*out_w]` matrix (overwrites `cols`).
pub fn im2col<T: Element>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let k = g.kernel;
    let p = g.cols();
    for c in 0..g.channels {
        let plane = &x[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.in_h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *v = if ix < 0 || ix >= g.in_w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-and-adds columns back into `x`.
pub fn col2im<T: Element>(cols: &[T], g: &ConvGeom, x: &mut [T]) {
    let k = g.kernel;
    let p = g.cols();
    for c in 0..g.channels {
        let plane = &mut x[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.in_w as isize {
                            dst[ix as usize] = dst[ix as usize] + src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// `c[m,n] += a[m,k] * b[k,n]`
pub fn gemm_nn<T: Element>(m: usize, n: usize, k: usize, a: &[T], b: &[T], c: &mut [T]) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv = *cv + av * bv;
            }
        }
    }
}

/// `c[m,n] += a[k,m]^T * b[k,n]`
pub fn gemm_tn<T: Element>(m: usize, n: usize, k: usize, a: &[T], b: &[T], c: &mut [T]) {
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a[p * m + i];
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv = *cv + av * bv;
            }
        }
    }
}

/// `c[m,n] += a[m,k] * b[n,k]^T`
pub fn gemm_nt<T: Element>(m: usize, n: usize, k: usize, a: &[T], b: &[T], c: &mut [T]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            c[i * n + j] = c[i * n + j] + dot(arow, brow);
        }
    }
}

/// Dot product with eight fixed lanes, combined in a fixed order.
pub fn dot<T: Element>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            lanes[l] = lanes[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + x * y;
    }
    let s01 = lanes[0] + lanes[1];
    let s23 = lanes[2] + lanes[3];
    let s45 = lanes[4] + lanes[5];
    let s67 = lanes[6] + lanes[7];
    ((s01 + s23) + (s45 + s67)) + tail
}

/// Sequential sum in index order.
pub fn sum<T: Element>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, &v| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_variants_agree() {
        let a: Vec<f64> = (0..6).map(|v| v as f64).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64) * 0.5).collect(); // 3x4
        let mut c = vec![0.0; 8];
        gemm_nn(2, 4, 3, &a, &b, &mut c);
        let naive = |i: usize, j: usize| (0..3).map(|p| a[i * 3 + p] * b[p * 4 + j]).sum::<f64>();
        for i in 0..2 {
            for j in 0..4 {
                assert_eq!(c[i * 4 + j], naive(i, j));
            }
        }
        // a^T stored as 3x2
        let at: Vec<f64> = (0..3)
            .flat_map(|p| (0..2).map(move |i| (i * 3 + p) as f64))
            .collect();
        let mut c2 = vec![0.0; 8];
        gemm_tn(2, 4, 3, &at, &b, &mut c2);
        assert_eq!(c, c2);
        // b^T stored as 4x3
        let bref = &b;
        let bt: Vec<f64> = (0..4)
            .flat_map(|j| (0..3).map(move |p| bref[p * 4 + j]))
            .collect();
        let mut c3 = vec![0.0; 8];
        gemm_nt(2, 4, 3, &a, &bt, &mut c3);
        assert_eq!(c, c3);
    }

    #[test]
    fn dot_handles_tail() {
        let a: Vec<f64> = (0..19).map(|v| v as f64).collect();
        assert_eq!(dot(&a, &a), (0..19).map(|v| (v * v) as f64).sum::<f64>());
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let g = ConvGeom {
            channels: 2,
            in_h: 5,
            in_w: 4,
            kernel: 3,
            stride: 2,
            pad: 1,
            out_h: conv_out(5, 3, 2, 1).unwrap(),
            out_w: conv_out(4, 3, 2, 1).unwrap(),
        };
        let x: Vec<f64> = (0..40).map(|v| ((v * 7) % 11) as f64 - 5.0).collect();
        let y: Vec<f64> = (0..g.rows() * g.cols())
            .map(|v| ((v * 5) % 13) as f64 - 6.0)
            .collect();
        let mut cols = vec![0.0; y.len()];
        im2col(&x, &g, &mut cols);
        let mut back = vec![0.0; x.len()];
        col2im(&y, &g, &mut back);
        // <im2col(x), y> == <x, col2im(y)>
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert_eq!(lhs, rhs);
    }
}
