use super::photo::{plane_strides_1d, strides_4d};
use super::projector::LineProjector;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Integral of `f` over the manifold `alpha*x + (1-alpha)*u = xbar`.
///
/// For `alpha != 0` this is the same discretisation as `forward_p` at that
/// sample. At `alpha = 0` the manifold pins `u = xbar` and the integral runs
/// over `x`.
pub fn coupled_radon(f: &Field, alpha: f64, xbar: &[f64]) -> Result<f64> {
    if xbar.len() != f.n {
        return Err(Error::Shape(format!("xbar has {} coordinates for n={}", xbar.len(), f.n)));
    }
    if !alpha.is_finite() || xbar.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("alpha and xbar must be finite".into()));
    }
    // the output grid only fixes the projector geometry; `integrate_at` takes the point itself
    let dummy = |g: &Grid| Grid::new(2, g.spacing, 0.0).expect("valid");
    if f.n == 1 {
        let p = LineProjector::new(alpha, f.x[0], f.u[0], dummy(&f.x[0]));
        let (sx, su) = plane_strides_1d(&f.u[0]);
        return Ok(p.integrate_at(xbar[0], &f.values, 0, sx, su));
    }
    let s = strides_4d(&f.x, &f.u);
    let p1 = LineProjector::new(alpha, f.x[0], f.u[0], dummy(&f.x[0]));
    let p2 = LineProjector::new(alpha, f.x[1], f.u[1], dummy(&f.x[1]));
    let (nx2, nu2) = (f.x[1].count, f.u[1].count);
    let mut t = vec![0.0; nx2 * nu2];
    for i2 in 0..nx2 {
        for j2 in 0..nu2 {
            t[i2 * nu2 + j2] = p1.integrate_at(xbar[0], &f.values, i2 * s.sx2 + j2 * s.su2, s.sx1, s.su1);
        }
    }
    Ok(p2.integrate_at(xbar[1], &t, 0, nu2, 1))
}

/// Classic 2-D Radon transform of an `n = 1` field: the arc-length integral
/// over `{theta . (x, u) = p}`, sampled every `min(dx, du)/2` with bilinear
/// interpolation and zero extension.
pub fn classic_radon_2d(f: &Field, theta: [f64; 2], p: f64) -> Result<f64> {
    if f.n != 1 {
        return Err(Error::Shape("classic Radon transform needs an n=1 field".into()));
    }
    let norm = theta[0].hypot(theta[1]);
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("theta must be a unit vector, |theta| = {norm}")));
    }
    let (gx, gu) = (f.x[0], f.u[0]);
    let h = gx.spacing.min(gu.spacing) / 2.0;
    let reach = [gx.coord(0), gx.coord(gx.count - 1)]
        .iter()
        .flat_map(|&a| [gu.coord(0), gu.coord(gu.count - 1)].map(|b| a.hypot(b)))
        .fold(0.0, f64::max);
    let steps = (reach / h).ceil() as i64 + 1;
    let (c, s) = (theta[0], theta[1]);
    let nu = gu.count;
    let mut acc = 0.0;
    for k in -steps..=steps {
        let tau = k as f64 * h;
        let x = p * c - tau * s;
        let u = p * s + tau * c;
        if let (Some(sx), Some(su)) = (gx.stencil(x), gu.stencil(u)) {
            let v = |i: usize, j: usize| f.values[i * nu + j];
            acc += (1.0 - sx.w) * ((1.0 - su.w) * v(sx.i, su.i) + su.w * v(sx.i, su.i + 1))
                + sx.w * ((1.0 - su.w) * v(sx.i + 1, su.i) + su.w * v(sx.i + 1, su.i + 1));
        }
    }
    Ok(acc * h)
}
