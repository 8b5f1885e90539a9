//! Sampling lattices and the sampled containers passed between operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform lattice `origin + i * spacing`, `i in 0..count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub count: usize,
    pub spacing: f64,
    pub origin: f64,
}

/// Linear interpolation footprint of a coordinate on a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stencil {
    pub i: usize,
    pub w: f64,
}

impl Grid {
    pub fn new(count: usize, spacing: f64, origin: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::Grid(format!("count must be >= 2, got {count}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::Grid(format!("spacing must be positive, got {spacing}")));
        }
        if !origin.is_finite() {
            return Err(Error::Grid("origin is not finite".into()));
        }
        Ok(Grid {
            count,
            spacing,
            origin,
        })
    }

    /// Grid centred on zero.
    pub fn symmetric(count: usize, spacing: f64) -> Result<Self> {
        Grid::new(count, spacing, -spacing * (count as f64 - 1.0) / 2.0)
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.coord(i)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        let expect = -self.spacing * (self.count as f64 - 1.0) / 2.0;
        (self.origin - expect).abs() <= 1e-12 * self.spacing.max(expect.abs())
    }

    /// Physical length covered by the samples, `(count - 1) * spacing`.
    pub fn extent(&self) -> f64 {
        (self.count as f64 - 1.0) * self.spacing
    }

    /// Fractional index of coordinate `c`.
    #[inline]
    pub fn position(&self, c: f64) -> f64 {
        (c - self.origin) / self.spacing
    }

    /// Interpolation stencil for `c`; `None` outside `[coord(0), coord(count-1)]`.
    /// A coordinate on the last sample uses `(count - 2, 1.0)`.
    #[inline]
    pub fn stencil(&self, c: f64) -> Option<Stencil> {
        stencil_at(self.position(c), self.count)
    }
}

/// Positions this close outside either end (in cells) snap onto the end, so
/// the same sample reached by differently rounded arithmetic gets the same
/// stencil.
const EDGE_SLACK: f64 = 1e-9;

#[inline]
pub(crate) fn stencil_at(t: f64, count: usize) -> Option<Stencil> {
    let last = (count - 1) as f64;
    if !(t >= -EDGE_SLACK && t <= last + EDGE_SLACK) {
        return None;
    }
    let t = t.clamp(0.0, last);
    let i = (t.floor() as usize).min(count - 2);
    Some(Stencil { i, w: t - i as f64 })
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Sampled light field `f(x, u)`; axis order `(x1[, x2], u1[, u2])`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub n: usize,
    pub x: Vec<Grid>,
    pub u: Vec<Grid>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(x: Vec<Grid>, u: Vec<Grid>, values: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if !(n == 1 || n == 2) || u.len() != n {
            return Err(Error::Shape(format!(
                "field needs n in {{1,2}} x-axes and as many u-axes, got {} and {}",
                x.len(),
                u.len()
            )));
        }
        let f = Field { n, x, u, values };
        if f.values.len() != f.len() {
            return Err(Error::Shape(format!(
                "field grids hold {} samples but {} values were given",
                f.len(),
                f.values.len()
            )));
        }
        check_finite(&f.values, "field")?;
        Ok(f)
    }

    pub fn zeros(x: Vec<Grid>, u: Vec<Grid>) -> Result<Self> {
        let len = x.iter().chain(u.iter()).map(|g| g.count).product();
        Field::new(x, u, vec![0.0; len])
    }

    /// Samples `func(x, u)` on the lattice (`x`, `u` have `n` entries each).
    pub fn from_fn(x: Vec<Grid>, u: Vec<Grid>, func: impl Fn(&[f64], &[f64]) -> f64) -> Result<Self> {
        let mut f = Field::zeros(x, u)?;
        let n = f.n;
        let shape = f.shape();
        let mut idx = vec![0usize; 2 * n];
        let mut xs = vec![0.0; n];
        let mut us = vec![0.0; n];
        for v in f.values.iter_mut() {
            for a in 0..n {
                xs[a] = f.x[a].coord(idx[a]);
                us[a] = f.u[a].coord(idx[n + a]);
            }
            *v = func(&xs, &us);
            for a in (0..2 * n).rev() {
                idx[a] += 1;
                if idx[a] < shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        check_finite(&f.values, "field")?;
        Ok(f)
    }

    /// Axis lengths in storage order.
    pub fn shape(&self) -> Vec<usize> {
        self.x.iter().chain(self.u.iter()).map(|g| g.count).collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature cell volume `prod(dx) * prod(du)`.
    pub fn cell(&self) -> f64 {
        self.x.iter().chain(self.u.iter()).map(|g| g.spacing).product()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Field::new(self.x.clone(), self.u.clone(), values)
    }

    pub fn same_geometry(&self, other: &Field) -> bool {
        self.x == other.x && self.u == other.u
    }
}

/// Ordered refocus parameters with their quadrature weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub alphas: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AlphaSchedule {
    /// Trapezoid weights; a single node gets weight 1.
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        let weights = trapezoid(&alphas);
        AlphaSchedule::with_weights(alphas, weights)
    }

    pub fn with_weights(alphas: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Schedule("no alphas".into()));
        }
        if weights.len() != alphas.len() {
            return Err(Error::Schedule(format!(
                "{} weights for {} alphas",
                weights.len(),
                alphas.len()
            )));
        }
        if let Some(a) = alphas.iter().find(|a| !a.is_finite()) {
            return Err(Error::Schedule(format!("non-finite alpha {a}")));
        }
        if let Some(a) = alphas.iter().find(|&&a| a == 0.0 || a == 1.0) {
            return Err(Error::Schedule(format!("alpha {a} is excluded (0 and 1 are singular)")));
        }
        if alphas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Schedule("alphas must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Schedule("weights must be positive".into()));
        }
        Ok(AlphaSchedule { alphas, weights })
    }

    /// `count` uniform nodes on `[a_min, a_max]`; a node closer than half a
    /// step to 0 or 1 is moved to exactly half a step away on its own side
    /// (a node sitting exactly on 0 or 1 moves up).
    pub fn uniform(a_min: f64, a_max: f64, count: usize) -> Result<Self> {
        if count < 2 || !(a_max > a_min) {
            return Err(Error::Schedule(format!(
                "uniform schedule needs count >= 2 and a_max > a_min, got [{a_min}, {a_max}] x {count}"
            )));
        }
        let step = (a_max - a_min) / (count - 1) as f64;
        let mut alphas: Vec<f64> = (0..count).map(|k| a_min + k as f64 * step).collect();
        for p in [0.0, 1.0] {
            for a in alphas.iter_mut() {
                let d = *a - p;
                if d.abs() < step / 2.0 {
                    *a = if d < 0.0 { p - step / 2.0 } else { p + step / 2.0 };
                }
            }
        }
        AlphaSchedule::new(alphas)
    }

    /// `2k+1` nodes on `[-a, 1+a]`, the default inversion schedule.
    pub fn symmetric_range(a: f64, k: usize) -> Result<Self> {
        AlphaSchedule::uniform(-a, 1.0 + a, 2 * k + 1)
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Smallest gap between consecutive nodes (infinite for one node).
    pub fn min_step(&self) -> f64 {
        self.alphas
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn trapezoid(alphas: &[f64]) -> Vec<f64> {
    let n = alphas.len();
    if n == 1 {
        return vec![1.0];
    }
    let mut w = vec![0.0; n];
    for k in 0..n - 1 {
        let h = (alphas[k + 1] - alphas[k]) / 2.0;
        w[k] += h;
        w[k + 1] += h;
    }
    w
}

/// Sampled focal stack `g(alpha, xbar)`; axis order `(alpha, xbar1[, xbar2])`.
#[derive(Clone, Debug, PartialEq)]
pub struct FocalStack {
    pub n: usize,
    pub schedule: AlphaSchedule,
    pub xbar: Vec<Grid>,
    pub values: Vec<f64>,
}

impl FocalStack {
    pub fn new(schedule: AlphaSchedule, xbar: Vec<Grid>, values: Vec<f64>) -> Result<Self> {
        let n = xbar.len();
        if !(n == 1 || n == 2) {
            return Err(Error::Shape(format!("stack needs 1 or 2 xbar axes, got {n}")));
        }
        let s = FocalStack {
            n,
            schedule,
            xbar,
            values,
        };
        if s.values.len() != s.len() {
            return Err(Error::Shape(format!(
                "stack geometry holds {} samples but {} values were given",
                s.len(),
                s.values.len()
            )));
        }
        check_finite(&s.values, "focal stack")?;
        Ok(s)
    }

    pub fn zeros(schedule: AlphaSchedule, xbar: Vec<Grid>) -> Result<Self> {
        let len = schedule.len() * xbar.iter().map(|g| g.count).product::<usize>();
        FocalStack::new(schedule, xbar, vec![0.0; len])
    }

    pub fn shape(&self) -> Vec<usize> {
        std::iter::once(self.schedule.len())
            .chain(self.xbar.iter().map(|g| g.count))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples per alpha slice.
    pub fn slice_len(&self) -> usize {
        self.xbar.iter().map(|g| g.count).product()
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let m = self.slice_len();
        &self.values[k * m..(k + 1) * m]
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        FocalStack::new(self.schedule.clone(), self.xbar.clone(), values)
    }
}

/// Data of the two-parameter transform: axis order `(alpha1, alpha2, xbar1, xbar2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BarStack {
    pub schedules: [AlphaSchedule; 2],
    pub xbar: [Grid; 2],
    pub values: Vec<f64>,
}

impl BarStack {
    pub fn new(schedules: [AlphaSchedule; 2], xbar: [Grid; 2], values: Vec<f64>) -> Result<Self> {
        let s = BarStack {
            schedules,
            xbar,
            values,
        };
        if s.values.len() != s.len() {
            return Err(Error::Shape(format!(
                "bar stack geometry holds {} samples but {} values were given",
                s.len(),
                s.values.len()
            )));
        }
        check_finite(&s.values, "bar stack")?;
        Ok(s)
    }

    pub fn shape(&self) -> [usize; 4] {
        [
            self.schedules[0].len(),
            self.schedules[1].len(),
            self.xbar[0].count,
            self.xbar[1].count,
        ]
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
