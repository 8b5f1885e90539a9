use rayon::prelude::*;

use super::projector::LineProjector;
use crate::error::{Error, Result};
use crate::grid::{AlphaSchedule, Field, FocalStack, Grid};

/// Alpha nodes per partial sum in the 1-D back projection; fixed so the
/// summation order does not depend on the thread count.
const ALPHA_CHUNK: usize = 8;

pub(crate) fn plane_strides_1d(u: &Grid) -> (usize, usize) {
    (u.count, 1)
}

/// Strides of the `(x1, u1)` plane and of the `(x2, u2)` fibre in a 4-D field.
pub(crate) struct Strides4 {
    pub sx1: usize,
    pub sx2: usize,
    pub su1: usize,
    pub su2: usize,
}

pub(crate) fn strides_4d(x: &[Grid], u: &[Grid]) -> Strides4 {
    let su2 = 1;
    let su1 = u[1].count;
    let sx2 = u[0].count * su1;
    let sx1 = x[1].count * sx2;
    Strides4 { sx1, sx2, su1, su2 }
}

/// Symmetric `xbar` grid wide enough to hold every slice of `schedule` for
/// fields on `x` x `u`, with spacing `dx / refine`.
pub fn xbar_grid_for(schedule: &AlphaSchedule, x: &Grid, u: &Grid, refine: usize) -> Result<Grid> {
    let rx = x.coord(0).abs().max(x.coord(x.count - 1).abs());
    let ru = u.coord(0).abs().max(u.coord(u.count - 1).abs());
    let reach = schedule
        .alphas
        .iter()
        .map(|a| a.abs() * rx + (1.0 - a).abs() * ru)
        .fold(0.0, f64::max);
    let spacing = x.spacing / refine.max(1) as f64;
    let half = (reach / spacing - 1e-9).ceil() as usize;
    Grid::symmetric(2 * half + 1, spacing)
}

/// Back-projection weight of the weighted dual at `alpha`.
///
/// `n = 1`: `(alpha^2 + (1-alpha)^2)^(-beta/2)`.
/// `n = 2`: `|alpha|^(2-beta) * |1-alpha|^(-beta)`, the singular factor capped
/// at `(step/2)^(-beta)` where `step` is the mean node spacing.
pub fn dual_weight(n: usize, alpha: f64, beta: f64, step: f64) -> f64 {
    if beta == 0.0 {
        return if n == 1 { 1.0 } else { alpha * alpha };
    }
    if n == 1 {
        (alpha * alpha + (1.0 - alpha) * (1.0 - alpha)).powf(-beta / 2.0)
    } else {
        let cap = if beta > 0.0 && step.is_finite() {
            (step / 2.0).powf(-beta)
        } else {
            f64::INFINITY
        };
        alpha.abs().powf(2.0 - beta) * (1.0 - alpha).abs().powf(-beta).min(cap)
    }
}

pub(crate) fn mean_step(s: &AlphaSchedule) -> f64 {
    if s.len() < 2 {
        return f64::INFINITY;
    }
    (s.alphas[s.len() - 1] - s.alphas[0]) / (s.len() - 1) as f64
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta < 2.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be finite and < 2, got {beta}")));
    }
    Ok(())
}

/// Focal stack `P f` on `schedule` x `xbar`.
pub fn forward_p(f: &Field, schedule: &AlphaSchedule, xbar: &[Grid]) -> Result<FocalStack> {
    if xbar.len() != f.n {
        return Err(Error::Shape(format!(
            "{} xbar axes for an n={} field",
            xbar.len(),
            f.n
        )));
    }
    let mut stack = FocalStack::zeros(schedule.clone(), xbar.to_vec())?;
    let m = stack.slice_len();
    if f.n == 1 {
        let (sx, su) = plane_strides_1d(&f.u[0]);
        stack
            .values
            .par_chunks_mut(m)
            .zip(schedule.alphas.par_iter())
            .for_each(|(out, &a)| {
                LineProjector::new(a, f.x[0], f.u[0], xbar[0]).forward(&f.values, 0, sx, su, out);
            });
    } else {
        let fm = fibre_major(&f.values, &f.x, &f.u);
        for (k, &a) in schedule.alphas.iter().enumerate() {
            slice_4d(&fm, f, a, xbar, &mut stack.values[k * m..(k + 1) * m]);
        }
    }
    Ok(stack)
}

fn slice_4d(fm: &[f64], f: &Field, alpha: f64, xbar: &[Grid], out: &mut [f64]) {
    let p1 = LineProjector::new(alpha, f.x[0], f.u[0], xbar[0]);
    let p2 = LineProjector::new(alpha, f.x[1], f.u[1], xbar[1]);
    let t = forward_first_axis(fm, &f.x, &f.u, &p1);
    forward_second_axis(&t, &f.x, &f.u, &p2, out);
}

/// One slice `P_alpha f` on `xbar`. Unlike `forward_p` any nonzero `alpha`
/// is accepted, including 1.
pub fn forward_slice(f: &Field, alpha: f64, xbar: &[Grid]) -> Result<Vec<f64>> {
    if xbar.len() != f.n {
        return Err(Error::Shape(format!("{} xbar axes for an n={} field", xbar.len(), f.n)));
    }
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be finite and nonzero, got {alpha}")));
    }
    let mut out = vec![0.0; xbar.iter().map(|g| g.count).product()];
    if f.n == 1 {
        let (sx, su) = plane_strides_1d(&f.u[0]);
        LineProjector::new(alpha, f.x[0], f.u[0], xbar[0]).forward(&f.values, 0, sx, su, &mut out);
    } else {
        slice_4d(&fibre_major(&f.values, &f.x, &f.u), f, alpha, xbar, &mut out);
    }
    Ok(out)
}

/// Reorders a field `[x1][x2][u1][u2]` into fibre-major `[x2][u2][x1][u1]`.
pub(crate) fn fibre_major(values: &[f64], x: &[Grid], u: &[Grid]) -> Vec<f64> {
    let s = strides_4d(x, u);
    let (nx1, nu1, nu2) = (x[0].count, u[0].count, u[1].count);
    let plane = nx1 * nu1;
    let mut out = vec![0.0; values.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(fib, dst)| {
        let base = (fib / nu2) * s.sx2 + (fib % nu2) * s.su2;
        for i1 in 0..nx1 {
            for j1 in 0..nu1 {
                dst[i1 * nu1 + j1] = values[base + i1 * s.sx1 + j1 * s.su1];
            }
        }
    });
    out
}

/// Transposes a row-major `rows x cols` array.
pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    out.par_chunks_mut(rows).enumerate().for_each(|(c, dst)| {
        for (r, v) in dst.iter_mut().enumerate() {
            *v = a[r * cols + c];
        }
    });
    out
}

/// Contracts `(x1, u1)` of a fibre-major field: result layout `[m1][x2][u2]`.
pub(crate) fn forward_first_axis(fm: &[f64], x: &[Grid], u: &[Grid], p1: &LineProjector) -> Vec<f64> {
    let m1 = p1.outputs();
    let fibres = x[1].count * u[1].count;
    let plane = x[0].count * u[0].count;
    let nu1 = u[0].count;
    let mut t = vec![0.0; fibres * m1];
    t.par_chunks_mut(m1).enumerate().for_each(|(fib, out)| {
        p1.forward(fm, fib * plane, nu1, 1, out);
    });
    transpose(&t, fibres, m1)
}

/// Contracts `(x2, u2)` of a `[m1][x2][u2]` array into `out[m1][m2]`.
pub(crate) fn forward_second_axis(t: &[f64], x: &[Grid], u: &[Grid], p2: &LineProjector, out: &mut [f64]) {
    let m2 = p2.outputs();
    let plane = x[1].count * u[1].count;
    let nu2 = u[1].count;
    out.par_chunks_mut(m2).enumerate().for_each(|(i, row)| {
        p2.forward(t, i * plane, nu2, 1, row);
    });
}

/// Exact transpose of `forward_p` under quadrature-weighted inner products.
pub fn dual_p(g: &FocalStack, x: &[Grid], u: &[Grid]) -> Result<Field> {
    dual_with(g, x, u, |_| 1.0)
}

/// Dual with each alpha slice multiplied by `dual_weight(n, alpha, beta)`.
pub fn dual_p_weighted(g: &FocalStack, beta: f64, x: &[Grid], u: &[Grid]) -> Result<Field> {
    check_beta(beta)?;
    let n = g.n;
    let step = mean_step(&g.schedule);
    dual_with(g, x, u, |a| dual_weight(n, a, beta, step))
}

/// `sum_k weight_k * omega(alpha_k) * c * P_k^T g_k` with
/// `c = prod(dxbar) / (prod(dx) * prod(du))`.
pub(crate) fn dual_with(g: &FocalStack, x: &[Grid], u: &[Grid], omega: impl Fn(f64) -> f64 + Sync) -> Result<Field> {
    if x.len() != g.n || u.len() != g.n {
        return Err(Error::Shape(format!(
            "target grids have {} x / {} u axes for an n={} stack",
            x.len(),
            u.len(),
            g.n
        )));
    }
    let mut field = Field::zeros(x.to_vec(), u.to_vec())?;
    let norm = g.xbar.iter().map(|b| b.spacing).product::<f64>() / field.cell();
    let coefs: Vec<f64> = g
        .schedule
        .alphas
        .iter()
        .zip(&g.schedule.weights)
        .map(|(&a, &w)| w * omega(a) * norm)
        .collect();
    if g.n == 1 {
        dual_plane_1d(g, x[0], u[0], &coefs, &mut field.values);
    } else {
        let m = g.slice_len();
        let mut acc = FibreAccumulator::new(x, u);
        for (k, &a) in g.schedule.alphas.iter().enumerate() {
            let p1 = LineProjector::new(a, x[0], u[0], g.xbar[0]);
            let p2 = LineProjector::new(a, x[1], u[1], g.xbar[1]);
            let s = transpose_second_axis(&g.values[k * m..(k + 1) * m], x, u, &p2, 1.0);
            acc.add_first_axis(&s, &p1, coefs[k]);
        }
        acc.write_into(&mut field.values);
    }
    Ok(field)
}

fn dual_plane_1d(g: &FocalStack, x: Grid, u: Grid, coefs: &[f64], out: &mut [f64]) {
    let (sx, su) = plane_strides_1d(&u);
    let m = g.slice_len();
    let len = out.len();
    let alphas = &g.schedule.alphas;
    let partials: Vec<Vec<f64>> = (0..alphas.len())
        .collect::<Vec<_>>()
        .par_chunks(ALPHA_CHUNK)
        .map(|ks| {
            let mut part = vec![0.0; len];
            for &k in ks {
                let p = LineProjector::new(alphas[k], x, u, g.xbar[0]);
                let slice = &g.values[k * m..(k + 1) * m];
                p.transpose_add(|i| slice[i], coefs[k], &mut part, 0, sx, su);
            }
            part
        })
        .collect();
    for part in partials {
        for (o, v) in out.iter_mut().zip(part) {
            *o += v;
        }
    }
}

/// Transpose of the `(x2, u2)` contraction for one `[m1][m2]` slice:
/// result layout `[m1][x2][u2]`.
pub(crate) fn transpose_second_axis(
    slice: &[f64],
    x: &[Grid],
    u: &[Grid],
    p2: &LineProjector,
    coef: f64,
) -> Vec<f64> {
    let m2 = p2.outputs();
    let plane = x[1].count * u[1].count;
    let m1 = slice.len() / m2;
    let mut s = vec![0.0; m1 * plane];
    s.par_chunks_mut(plane).enumerate().for_each(|(i, dst)| {
        let row = &slice[i * m2..(i + 1) * m2];
        p2.transpose_add(|m| row[m], coef, dst, 0, u[1].count, 1);
    });
    s
}

/// 4-D accumulator stored fibre-major, `[x2][u2][x1][u1]`, so fibres can be
/// updated in parallel without write conflicts.
pub(crate) struct FibreAccumulator {
    x: [Grid; 2],
    u: [Grid; 2],
    pub(crate) data: Vec<f64>,
}

impl FibreAccumulator {
    pub(crate) fn new(x: &[Grid], u: &[Grid]) -> Self {
        let len = x.iter().chain(u.iter()).map(|g| g.count).product();
        FibreAccumulator {
            x: [x[0], x[1]],
            u: [u[0], u[1]],
            data: vec![0.0; len],
        }
    }

    fn plane(&self) -> usize {
        self.x[0].count * self.u[0].count
    }

    /// Adds `coef * P1^T s` where `s` has layout `[m1][x2][u2]`.
    pub(crate) fn add_first_axis(&mut self, s: &[f64], p1: &LineProjector, coef: f64) {
        let fibres = self.x[1].count * self.u[1].count;
        let plane = self.plane();
        let nu1 = self.u[0].count;
        let m1 = p1.outputs();
        let st = transpose(s, m1, fibres);
        self.data.par_chunks_mut(plane).enumerate().for_each(|(fib, dst)| {
            let row = &st[fib * m1..(fib + 1) * m1];
            p1.transpose_add(|m| row[m], coef, dst, 0, nu1, 1);
        });
    }

    /// Reorders into the field layout `[x1][x2][u1][u2]`.
    pub(crate) fn write_into(&self, out: &mut [f64]) {
        let s = strides_4d(&self.x, &self.u);
        let (nx1, nu1) = (self.x[0].count, self.u[0].count);
        let nu2 = self.u[1].count;
        let plane = self.plane();
        for (fib, chunk) in self.data.chunks(plane).enumerate() {
            let (i2, j2) = (fib / nu2, fib % nu2);
            for i1 in 0..nx1 {
                for j1 in 0..nu1 {
                    out[i1 * s.sx1 + i2 * s.sx2 + j1 * s.su1 + j2 * s.su2] = chunk[i1 * nu1 + j1];
                }
            }
        }
    }
}
