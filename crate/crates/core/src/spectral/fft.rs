use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

use rayon::prelude::*;

/// DFT frequency of bin `k` for `count` samples at `spacing` (unshifted layout).
#[inline]
pub fn freq(k: usize, count: usize, spacing: f64) -> f64 {
    let kk = if k <= (count - 1) / 2 { k as f64 } else { k as f64 - count as f64 };
    kk / (count as f64 * spacing)
}

thread_local! {
    // planners cache their plans, so keep one per thread
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// In-place DFT along `axes` of a row-major array; the inverse is
/// normalised by the product of the transformed lengths.
pub fn fft_axes(data: &mut [Complex64], shape: &[usize], axes: &[usize], inverse: bool) {
    for &ax in axes {
        let n = shape[ax];
        if n < 2 {
            continue;
        }
        fft_one_axis(data, shape, ax, &plan(n, inverse));
    }
    if inverse {
        let total: usize = axes.iter().map(|&a| shape[a]).product();
        let s = 1.0 / total as f64;
        data.par_iter_mut().for_each(|v| *v *= s);
    }
}

fn fft_one_axis(data: &mut [Complex64], shape: &[usize], ax: usize, plan: &Arc<dyn Fft<f64>>) {
    let n = shape[ax];
    let inner: usize = shape[ax + 1..].iter().product();
    if inner == 1 {
        data.par_chunks_mut(n).for_each(|lane| plan.process(lane));
        return;
    }
    // gather strided lanes in blocks of `inner` so each block is independent
    data.par_chunks_mut(n * inner).for_each(|block| {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for r in 0..inner {
            for k in 0..n {
                buf[k] = block[k * inner + r];
            }
            plan.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..n {
                block[k * inner + r] = buf[k];
            }
        }
    });
}

/// Copies a real array into the leading corner of a zero array of `padded` shape.
pub fn pad_real(values: &[f64], shape: &[usize], padded: &[usize]) -> Vec<Complex64> {
    let total: usize = padded.iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); total];
    for_each_index(shape, |src, idx| {
        out[flat(idx, padded)] = Complex64::new(values[src], 0.0);
    });
    out
}

/// Real part of the leading `shape` corner of a `padded` array.
pub fn crop_real(data: &[Complex64], padded: &[usize], shape: &[usize]) -> Vec<f64> {
    let total: usize = shape.iter().product();
    let mut out = vec![0.0; total];
    for_each_index(shape, |dst, idx| {
        out[dst] = data[flat(idx, padded)].re;
    });
    out
}

#[inline]
pub(crate) fn flat(idx: &[usize], shape: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

/// Calls `visit(flat_index, multi_index)` in row-major order.
pub(crate) fn for_each_index(shape: &[usize], mut visit: impl FnMut(usize, &[usize])) {
    let total: usize = shape.iter().product();
    if total == 0 {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    for lin in 0..total {
        visit(lin, &idx);
        for a in (0..shape.len()).rev() {
            idx[a] += 1;
            if idx[a] < shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn freq_layout() {
        let f: Vec<f64> = (0..4).map(|k| freq(k, 4, 0.5)).collect();
        assert_eq!(f, vec![0.0, 0.5, -1.0, -0.5]);
        let f: Vec<f64> = (0..5).map(|k| freq(k, 5, 1.0)).collect();
        assert_eq!(f, vec![0.0, 0.2, 0.4, -0.4, -0.2]);
    }

    #[test]
    fn forward_inverse_roundtrip_on_middle_axis() {
        let shape = [3, 5, 4];
        let v: Vec<Complex64> = (0..60).map(|i| Complex64::new(i as f64, (i * i % 7) as f64)).collect();
        let mut w = v.clone();
        fft_axes(&mut w, &shape, &[1], false);
        fft_axes(&mut w, &shape, &[1], true);
        for (a, b) in v.iter().zip(&w) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn strided_axis_matches_direct_dft() {
        let shape = [2, 3];
        let v: Vec<Complex64> = (0..6).map(|i| Complex64::new(i as f64 + 1.0, 0.0)).collect();
        let mut w = v.clone();
        fft_axes(&mut w, &shape, &[0], false);
        // column sums and differences
        for c in 0..3 {
            assert!((w[c] - (v[c] + v[3 + c])).norm() < 1e-12);
            assert!((w[3 + c] - (v[c] - v[3 + c])).norm() < 1e-12);
        }
    }
}
