//! Linear convolution of a grid array with a translation-invariant kernel,
//! by zero-padded FFT along every axis.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Returns `(K * f)_i = Σ_j K(i - j) f_j` over the grid, where `kernel`
/// receives the integer offset `i - j` per axis.
pub(crate) fn convolve(
    extents: &[usize],
    data: &[f64],
    kernel: impl Fn(&[isize]) -> f64,
) -> Vec<f64> {
    let n = extents.len();
    let padded: Vec<usize> = extents.iter().map(|&e| 2 * e).collect();
    let total: usize = padded.iter().product();
    let mut a = vec![Complex::new(0.0, 0.0); total];
    let mut k = vec![Complex::new(0.0, 0.0); total];
    let mut multi = vec![0usize; n];
    let mut off = vec![0isize; n];
    for idx in 0..total {
        let mut rem = idx;
        for d in 0..n {
            multi[d] = rem % padded[d];
            rem /= padded[d];
        }
        if multi.iter().zip(extents).all(|(m, e)| m < e) {
            let mut src = 0;
            for d in (0..n).rev() {
                src = src * extents[d] + multi[d];
            }
            a[idx].re = data[src];
        }
        for d in 0..n {
            let m = multi[d] as isize;
            off[d] = if multi[d] < extents[d] { m } else { m - padded[d] as isize };
        }
        // offsets with |o| = e never pair two cells of the grid
        if multi.iter().zip(extents).all(|(&m, &e)| m != e) {
            k[idx].re = kernel(&off);
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    fft_nd(&mut planner, &mut a, &padded, false);
    fft_nd(&mut planner, &mut k, &padded, false);
    for (x, y) in a.iter_mut().zip(&k) {
        *x *= *y;
    }
    fft_nd(&mut planner, &mut a, &padded, true);
    let scale = 1.0 / total as f64;
    let len: usize = extents.iter().product();
    let mut out = vec![0.0; len];
    for (idx, o) in out.iter_mut().enumerate() {
        let mut rem = idx;
        let mut dst = 0;
        let mut stride = 1;
        for d in 0..n {
            dst += (rem % extents[d]) * stride;
            rem /= extents[d];
            stride *= padded[d];
        }
        *o = a[dst].re * scale;
    }
    out
}

fn fft_nd(planner: &mut FftPlanner<f64>, buf: &mut [Complex<f64>], dims: &[usize], inverse: bool) {
    let total = buf.len();
    let mut stride = 1;
    for &len in dims {
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let mut line = vec![Complex::new(0.0, 0.0); len];
        let block = stride * len;
        for start in (0..total).step_by(block) {
            for inner in 0..stride {
                for (i, v) in line.iter_mut().enumerate() {
                    *v = buf[start + inner + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    buf[start + inner + i * stride] = *v;
                }
            }
        }
        stride *= len;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum_2d() {
        let ext = [5usize, 4];
        let data: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
        let ker = |o: &[isize]| {
            if o.iter().all(|&v| v == 0) {
                0.0
            } else {
                1.0 / ((o[0] * o[0] + o[1] * o[1]) as f64).powf(1.5)
            }
        };
        let got = convolve(&ext, &data, ker);
        for i in 0..20 {
            let (ix, iy) = ((i % 5) as isize, (i / 5) as isize);
            let mut want = 0.0;
            for j in 0..20 {
                let (jx, jy) = ((j % 5) as isize, (j / 5) as isize);
                want += ker(&[ix - jx, iy - jy]) * data[j];
            }
            assert!((got[i] - want).abs() < 1e-12, "{i}: {} vs {want}", got[i]);
        }
    }

    #[test]
    fn matches_direct_sum_3d() {
        let ext = [3usize, 2, 4];
        let data: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
        let ker = |o: &[isize]| 1.0 / (1.0 + (o[0].abs() + 2 * o[1].abs() + 3 * o[2].abs()) as f64);
        let got = convolve(&ext, &data, ker);
        let coords = |i: usize| [(i % 3) as isize, ((i / 3) % 2) as isize, (i / 6) as isize];
        for i in 0..24 {
            let a = coords(i);
            let want: f64 = (0..24)
                .map(|j| {
                    let b = coords(j);
                    ker(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]]) * data[j]
                })
                .sum();
            assert!((got[i] - want).abs() < 1e-12);
        }
    }
}
