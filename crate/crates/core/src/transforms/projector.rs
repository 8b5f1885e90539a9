use crate::grid::{stencil_at, Grid, Stencil};

/// Discrete line integral over `{alpha*x + (1-alpha)*u = xbar}` in one
/// `(x, u)` plane, for every sample of an `xbar` grid.
///
/// The line is parameterised by `u` (linear interpolation along `x`) when it
/// is steep in the sampling metric, `|alpha-1|*du <= |alpha|*dx`, and by `x`
/// (interpolation along `u`) otherwise. Each parameterisation carries its own
/// Jacobian, so both give the same continuum integral; the switch keeps the
/// interpolation step at most one cell per lane.
#[derive(Clone, Copy, Debug)]
pub struct LineProjector {
    pub alpha: f64,
    x: Grid,
    u: Grid,
    xbar: Grid,
    along_u: bool,
    scale: f64,
}

impl LineProjector {
    pub fn new(alpha: f64, x: Grid, u: Grid, xbar: Grid) -> Self {
        let along_u = (alpha - 1.0).abs() * u.spacing <= alpha.abs() * x.spacing;
        let scale = if along_u {
            u.spacing / alpha.abs()
        } else {
            x.spacing / (1.0 - alpha).abs()
        };
        LineProjector {
            alpha,
            x,
            u,
            xbar,
            along_u,
            scale,
        }
    }

    /// Jacobian factor multiplying the lane sum.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn outputs(&self) -> usize {
        self.xbar.count
    }

    fn lanes(&self) -> usize {
        if self.along_u {
            self.u.count
        } else {
            self.x.count
        }
    }

    fn stencil_grid(&self) -> &Grid {
        if self.along_u {
            &self.x
        } else {
            &self.u
        }
    }

    /// Interpolation coordinate of lane `l` on the line through `xb`.
    #[inline]
    fn coord_at(&self, xb: f64, l: usize) -> f64 {
        let a = self.alpha;
        if self.along_u {
            xb / a + (1.0 - 1.0 / a) * self.u.coord(l)
        } else {
            (xb - a * self.x.coord(l)) / (1.0 - a)
        }
    }

    #[inline]
    fn stencil(&self, xb: f64, l: usize) -> Option<Stencil> {
        let s = self.stencil_grid();
        stencil_at(s.position(self.coord_at(xb, l)), s.count)
    }

    /// Plane offsets of stencil cells `k` and `k+1` in lane `l`.
    #[inline]
    fn cells(&self, k: usize, l: usize, sx: usize, su: usize) -> (usize, usize) {
        if self.along_u {
            (k * sx + l * su, (k + 1) * sx + l * su)
        } else {
            (l * sx + k * su, l * sx + (k + 1) * su)
        }
    }

    /// Stencil position of output `m` in lane `l` is `t0 + m * dt`.
    #[inline]
    fn lane_line(&self, l: usize) -> (f64, f64) {
        let s = self.stencil_grid();
        let t0 = s.position(self.coord_at(self.xbar.origin, l));
        let slope = if self.along_u { self.alpha } else { 1.0 - self.alpha };
        (t0, self.xbar.spacing / (slope * s.spacing))
    }

    /// Outputs whose stencil in lane `l` can be non-empty (a superset).
    fn output_range(&self, l: usize) -> std::ops::Range<usize> {
        let s = self.stencil_grid();
        let m = self.xbar.count;
        let (t0, dt) = self.lane_line(l);
        let last = (s.count - 1) as f64;
        let (a, b) = if dt > 0.0 {
            (-t0 / dt, (last - t0) / dt)
        } else {
            ((last - t0) / dt, -t0 / dt)
        };
        let lo = (a.floor() - 1.0).max(0.0);
        let hi = (b.ceil() + 2.0).min(m as f64);
        if !(hi > lo) {
            return 0..0;
        }
        lo as usize..hi as usize
    }

    /// Line integral through a single point `xb`; agrees with `forward` up to
    /// rounding of the stencil position.
    pub fn integrate_at(&self, xb: f64, src: &[f64], base: usize, sx: usize, su: usize) -> f64 {
        let mut acc = 0.0;
        for l in 0..self.lanes() {
            if let Some(st) = self.stencil(xb, l) {
                let (c0, c1) = self.cells(st.i, l, sx, su);
                acc += (1.0 - st.w) * src[base + c0] + st.w * src[base + c1];
            }
        }
        self.scale * acc
    }

    /// `out[m] = line integral through xbar_m` of the plane at `base` with
    /// strides `sx` (x index) and `su` (u index).
    pub fn forward(&self, src: &[f64], base: usize, sx: usize, su: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.xbar.count);
        out.iter_mut().for_each(|v| *v = 0.0);
        let count = self.stencil_grid().count;
        for l in 0..self.lanes() {
            let (t0, dt) = self.lane_line(l);
            for m in self.output_range(l) {
                if let Some(st) = stencil_at(t0 + m as f64 * dt, count) {
                    let (c0, c1) = self.cells(st.i, l, sx, su);
                    out[m] += (1.0 - st.w) * src[base + c0] + st.w * src[base + c1];
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// Adds `coef` times the transpose of `forward` applied to `g` into the
    /// plane at `base`.
    pub fn transpose_add(
        &self,
        g: impl Fn(usize) -> f64,
        coef: f64,
        dst: &mut [f64],
        base: usize,
        sx: usize,
        su: usize,
    ) {
        let c = coef * self.scale;
        let count = self.stencil_grid().count;
        for l in 0..self.lanes() {
            let (t0, dt) = self.lane_line(l);
            for m in self.output_range(l) {
                if let Some(st) = stencil_at(t0 + m as f64 * dt, count) {
                    let v = c * g(m);
                    if v == 0.0 {
                        continue;
                    }
                    let (c0, c1) = self.cells(st.i, l, sx, su);
                    dst[base + c0] += (1.0 - st.w) * v;
                    dst[base + c1] += st.w * v;
                }
            }
        }
    }

    /// Visits every nonzero `(m, plane offset, weight)` of the operator matrix.
    pub fn for_each_entry(&self, sx: usize, su: usize, mut visit: impl FnMut(usize, usize, f64)) {
        let count = self.stencil_grid().count;
        for l in 0..self.lanes() {
            let (t0, dt) = self.lane_line(l);
            for m in self.output_range(l) {
                if let Some(st) = stencil_at(t0 + m as f64 * dt, count) {
                    let (c0, c1) = self.cells(st.i, l, sx, su);
                    visit(m, c0, self.scale * (1.0 - st.w));
                    visit(m, c1, self.scale * st.w);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grids(n: usize, d: f64, m: usize, db: f64) -> (Grid, Grid, Grid) {
        (
            Grid::symmetric(n, d).unwrap(),
            Grid::symmetric(n, d).unwrap(),
            Grid::symmetric(m, db).unwrap(),
        )
    }

    #[test]
    fn output_range_covers_every_nonempty_stencil() {
        let (x, u, xb) = grids(9, 0.5, 40, 0.25);
        for &a in &[-3.0, -0.7, 0.05, 0.3, 0.5, 0.97, 1.0, 1.3, 4.0] {
            let p = LineProjector::new(a, x, u, xb);
            for l in 0..p.lanes() {
                let r = p.output_range(l);
                for m in 0..xb.count {
                    if p.stencil(xb.coord(m), l).is_some() {
                        assert!(r.contains(&m), "alpha {a} lane {l} m {m} outside {r:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn parameterisation_switch() {
        let (x, u, xb) = grids(8, 1.0, 8, 1.0);
        assert!(LineProjector::new(2.0, x, u, xb).along_u);
        assert!(LineProjector::new(1.0, x, u, xb).along_u);
        assert!(LineProjector::new(0.5, x, u, xb).along_u);
        assert!(!LineProjector::new(0.4, x, u, xb).along_u);
        assert!(!LineProjector::new(0.0, x, u, xb).along_u);
        assert!(!LineProjector::new(-0.2, x, u, xb).along_u);
    }

    #[test]
    fn both_parameterisations_integrate_a_smooth_bump_alike() {
        // alpha near the switch point evaluated both ways
        let x = Grid::symmetric(161, 0.05).unwrap();
        let u = x;
        let f: Vec<f64> = (0..161)
            .flat_map(|i| {
                (0..161).map(move |j| {
                    let (xi, uj) = (x.coord(i), u.coord(j));
                    (-std::f64::consts::PI * (xi * xi + uj * uj)).exp()
                })
            })
            .collect();
        let a = 0.5;
        let mut pu = LineProjector::new(a, x, u, x);
        let mut px = pu;
        pu.along_u = true;
        pu.scale = u.spacing / a;
        px.along_u = false;
        px.scale = x.spacing / (1.0 - a);
        for xb in [-0.3, 0.0, 0.45] {
            let vu = pu.integrate_at(xb, &f, 0, 161, 1);
            let vx = px.integrate_at(xb, &f, 0, 161, 1);
            assert!((vu - vx).abs() < 1e-3 * vu.abs(), "{vu} vs {vx}");
        }
    }
}
