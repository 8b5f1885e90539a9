//! Two-parameter transform: an independent refocus parameter per axis.

use super::photo::{
    check_beta, dual_weight, fibre_major, forward_first_axis, forward_second_axis, transpose_second_axis, FibreAccumulator,
};
use super::projector::LineProjector;
use crate::error::{Error, Result};
use crate::grid::{AlphaSchedule, BarStack, Field, Grid};

/// `g(alpha1, alpha2, xbar1, xbar2)` for an `n = 2` field.
pub fn forward_pbar(f: &Field, schedules: &[AlphaSchedule; 2], xbar: &[Grid; 2]) -> Result<BarStack> {
    if f.n != 2 {
        return Err(Error::Shape("the two-parameter transform needs an n=2 field".into()));
    }
    let (k1n, k2n) = (schedules[0].len(), schedules[1].len());
    let m = xbar[0].count * xbar[1].count;
    let mut values = vec![0.0; k1n * k2n * m];
    let fm = fibre_major(&f.values, &f.x, &f.u);
    for (k1, &a1) in schedules[0].alphas.iter().enumerate() {
        let p1 = LineProjector::new(a1, f.x[0], f.u[0], xbar[0]);
        let t = forward_first_axis(&fm, &f.x, &f.u, &p1);
        for (k2, &a2) in schedules[1].alphas.iter().enumerate() {
            let p2 = LineProjector::new(a2, f.x[1], f.u[1], xbar[1]);
            let off = (k1 * k2n + k2) * m;
            forward_second_axis(&t, &f.x, &f.u, &p2, &mut values[off..off + m]);
        }
    }
    BarStack::new(schedules.clone(), *xbar, values)
}

/// Weighted transpose of `forward_pbar`; slice `(k1, k2)` is multiplied by
/// `prod_i (alpha_i^2 + (1-alpha_i)^2)^(-beta/2)`.
pub fn dual_pbar(g: &BarStack, beta: f64, x: &[Grid], u: &[Grid]) -> Result<Field> {
    check_beta(beta)?;
    if x.len() != 2 || u.len() != 2 {
        return Err(Error::Shape("the two-parameter dual needs 2 x and 2 u axes".into()));
    }
    let mut field = Field::zeros(x.to_vec(), u.to_vec())?;
    let norm = g.xbar[0].spacing * g.xbar[1].spacing / field.cell();
    let [s1, s2] = &g.schedules;
    let coef = |s: &AlphaSchedule, k: usize| s.weights[k] * dual_weight(1, s.alphas[k], beta, f64::INFINITY);
    let m = g.xbar[0].count * g.xbar[1].count;
    let plane2 = x[1].count * u[1].count;
    let mut acc = FibreAccumulator::new(x, u);
    for (k1, &a1) in s1.alphas.iter().enumerate() {
        let mut s = vec![0.0; g.xbar[0].count * plane2];
        for (k2, &a2) in s2.alphas.iter().enumerate() {
            let p2 = LineProjector::new(a2, x[1], u[1], g.xbar[1]);
            let off = (k1 * s2.len() + k2) * m;
            let part = transpose_second_axis(&g.values[off..off + m], x, u, &p2, coef(s2, k2));
            for (a, b) in s.iter_mut().zip(part) {
                *a += b;
            }
        }
        let p1 = LineProjector::new(a1, x[0], u[0], g.xbar[0]);
        acc.add_first_axis(&s, &p1, coef(s1, k1) * norm);
    }
    acc.write_into(&mut field.values);
    Ok(field)
}
