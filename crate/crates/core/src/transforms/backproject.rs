use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, FocalStack, Grid};

/// Pixel-driven weighted back projection
/// `sum_k w_k omega(alpha_k) g_k(alpha_k x + (1 - alpha_k) u)`, sampling each
/// slice by (bi)linear interpolation on its `xbar` grid.
///
/// This is a quadrature of the continuum dual, not the matrix transpose of
/// [`forward_p`](super::forward_p); its cost is independent of the `xbar`
/// sampling density.
pub fn backproject(g: &FocalStack, x: &[Grid], u: &[Grid], omega: impl Fn(f64) -> f64 + Sync) -> Result<Field> {
    if x.len() != g.n || u.len() != g.n {
        return Err(Error::Shape(format!(
            "target grids have {} x / {} u axes for an n={} stack",
            x.len(),
            u.len(),
            g.n
        )));
    }
    let mut field = Field::zeros(x.to_vec(), u.to_vec())?;
    let s = &g.schedule;
    let coefs: Vec<f64> = s.alphas.iter().zip(&s.weights).map(|(&a, &w)| w * omega(a)).collect();
    let m = g.slice_len();
    if g.n == 1 {
        let (gx, gu, xb) = (x[0], u[0], g.xbar[0]);
        field.values.par_chunks_mut(gu.count).enumerate().for_each(|(i, row)| {
            let xi = gx.coord(i);
            for (j, v) in row.iter_mut().enumerate() {
                let uj = gu.coord(j);
                let mut acc = 0.0;
                for (k, &a) in s.alphas.iter().enumerate() {
                    if let Some(st) = xb.stencil(a * xi + (1.0 - a) * uj) {
                        let sl = &g.values[k * m..];
                        acc += coefs[k] * ((1.0 - st.w) * sl[st.i] + st.w * sl[st.i + 1]);
                    }
                }
                *v = acc;
            }
        });
        return Ok(field);
    }
    let [b1, b2] = [g.xbar[0], g.xbar[1]];
    let (nx2, nu1, nu2) = (x[1].count, u[0].count, u[1].count);
    // rows of fixed (x1, x2); inner loops over (u1, u2)
    field.values.par_chunks_mut(nu1 * nu2).enumerate().for_each(|(r, block)| {
        let (x1, x2) = (x[0].coord(r / nx2), x[1].coord(r % nx2));
        for (k, &a) in s.alphas.iter().enumerate() {
            let sl = &g.values[k * m..(k + 1) * m];
            let c = coefs[k];
            for j1 in 0..nu1 {
                let Some(s1) = b1.stencil(a * x1 + (1.0 - a) * u[0].coord(j1)) else {
                    continue;
                };
                let (r0, r1) = (&sl[s1.i * b2.count..], &sl[(s1.i + 1) * b2.count..]);
                for j2 in 0..nu2 {
                    if let Some(s2) = b2.stencil(a * x2 + (1.0 - a) * u[1].coord(j2)) {
                        let lo = (1.0 - s2.w) * r0[s2.i] + s2.w * r0[s2.i + 1];
                        let hi = (1.0 - s2.w) * r1[s2.i] + s2.w * r1[s2.i + 1];
                        block[j1 * nu2 + j2] += c * ((1.0 - s1.w) * lo + s1.w * hi);
                    }
                }
            }
        }
    });
    Ok(field)
}
