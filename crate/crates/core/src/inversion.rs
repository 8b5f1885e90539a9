//! Analytic inversion of focal stacks: filter the data, back project with
//! alpha-dependent weights, filter the result.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AlphaSchedule, BarStack, Field, FocalStack, Grid};
use crate::spectral::{apply_filter_field, apply_filter_stack, bandlimit_slices, FilterKind, FilterSpec};
use crate::transforms::{backproject, check_beta, dual_weight, mean_step};

/// Quadrature nodes for the alpha-range completion integral.
const TAIL_NODES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    General,
    Fbp,
    Bpf,
    HilbertForm,
    LaplacianForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Band limit of every negative-order filter; defaults to 0.8 x Nyquist
    /// of the target `x` grid.
    #[serde(default)]
    pub cutoff_b: Option<f64>,
    /// Required for `n = 2` stacks: the field is taken to be single-slope.
    #[serde(default)]
    pub assume_lambertian: bool,
    /// Add the back projection of the alpha range beyond the schedule ends,
    /// extrapolated from the end slices (`n = 1` data and two-parameter data).
    #[serde(default = "yes")]
    pub tail_completion: bool,
    /// Back projection grid size, in multiples of the target grid, used
    /// before a field-domain filter; defaults to 3 for `n = 1` and 1 for `n = 2`.
    /// The field filter is applied circularly on this grid.
    #[serde(default)]
    pub margin: Option<usize>,
    /// Zero padding factor of the data filters.
    #[serde(default = "two")]
    pub pad: usize,
}

fn default_method() -> Method {
    Method::General
}

fn yes() -> bool {
    true
}

fn two() -> usize {
    2
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            beta: 0.0,
            method: Method::General,
            cutoff_b: None,
            assume_lambertian: false,
            tail_completion: true,
            margin: None,
            pad: 2,
        }
    }
}

impl ReconConfig {
    pub fn with_beta(beta: f64) -> Self {
        ReconConfig {
            beta,
            ..ReconConfig::default()
        }
    }

    pub fn lambertian(mut self) -> Self {
        self.assume_lambertian = true;
        self
    }

    pub fn method(mut self, m: Method) -> Self {
        self.method = m;
        self
    }

    pub fn cutoff(&self, x: &Grid) -> f64 {
        self.cutoff_b.unwrap_or(0.8 / (2.0 * x.spacing))
    }

    fn margin_for(&self, n: usize) -> usize {
        self.margin.unwrap_or(if n == 1 { 3 } else { 1 }).max(1)
    }

}

fn check_schedule(s: &AlphaSchedule) -> Result<()> {
    if s.alphas.iter().any(|&a| a == 0.0 || a == 1.0) {
        return Err(Error::Schedule("alpha schedule touches 0 or 1".into()));
    }
    Ok(())
}

fn check_targets(n: usize, x: &[Grid], u: &[Grid]) -> Result<()> {
    if x.len() != n || u.len() != n {
        return Err(Error::Shape(format!(
            "target grids have {} x / {} u axes for n={n} data",
            x.len(),
            u.len()
        )));
    }
    Ok(())
}

fn check_common(g: &FocalStack, cfg: &ReconConfig, x: &[Grid], u: &[Grid]) -> Result<()> {
    check_beta(cfg.beta)?;
    check_schedule(&g.schedule)?;
    check_targets(g.n, x, u)?;
    if g.n == 2 && !cfg.assume_lambertian {
        return Err(Error::Domain(
            "n=2 inversion is exact only for single-slope fields; set assume_lambertian".into(),
        ));
    }
    Ok(())
}

/// Dispatches on `cfg.method`.
pub fn invert(g: &FocalStack, cfg: &ReconConfig, x: &[Grid], u: &[Grid]) -> Result<Field> {
    match cfg.method {
        Method::General => invert_general(g, cfg, x, u),
        Method::Fbp => invert_fbp(g, cfg, x, u),
        Method::Bpf => invert_bpf(g, cfg, x, u),
        Method::HilbertForm => invert_hilbert_form(g, cfg, x, u),
        Method::LaplacianForm => invert_laplacian_form(g, cfg, x, u),
    }
}

/// Inversion of order `cfg.beta`: data filter of order `beta - 1` (`n = 1`)
/// or `2(beta - 1)` (`n = 2`), weighted back projection, then the field
/// filter of order `-beta` (isotropic for `n = 1`, coupled for `n = 2`).
pub fn invert_general(g: &FocalStack, cfg: &ReconConfig, x: &[Grid], u: &[Grid]) -> Result<Field> {
    check_common(g, cfg, x, u)?;
    let beta = cfg.beta;
    let b = cfg.cutoff(&x[0]);
    let order = if g.n == 1 { beta - 1.0 } else { 2.0 * (beta - 1.0) };
    let h = data_filter(g, FilterSpec::riesz(order), b, cfg.pad)?;
    let field_filter = if beta == 0.0 {
        None
    } else if g.n == 1 {
        Some(FilterSpec::riesz(-beta).with_cutoff(b))
    } else {
        Some(FilterSpec::coupled_riesz(-beta).with_cutoff(b))
    };
    backproject_and_filter(&h, slice_mass(g), beta, 1.0, field_filter, cfg, x, u)
}

/// Filtered back projection (`beta = 0`).
pub fn invert_fbp(g: &FocalStack, cfg: &ReconConfig, x: &[Grid], u: &[Grid]) -> Result<Field> {
    let cfg = ReconConfig {
        beta: 0.0,
        ..cfg.clone()
    };
    check_common(g, &cfg, x, u)?;
    if g.n == 1 {
        return invert_general(g, &cfg, x, u);
    }
    let b = cfg.cutoff(&x[0]);
    let spec = FilterSpec::new(FilterKind::BandlimitHb, 0.0).with_cutoff(b).with_pad(cfg.pad);
    let h = apply_filter_stack(g, &spec)?;
    backproject_and_filter(&h, 0.0, 0.0, 1.0, None, &cfg, x, u)
}

/// Back projection then filtering (`beta = 1`).
pub fn invert_bpf(g: &FocalStack, cfg: &ReconConfig, x: &[Grid], u: &[Grid]) -> Result<Field> {
    let cfg = ReconConfig {
        beta: 1.0,
        ..cfg.clone()
    };
    check_common(g, &cfg, x, u)?;
    let b = cfg.cutoff(&x[0]);
    let field_filter = if g.n == 1 {
        FilterSpec::riesz(-1.0).with_cutoff(b)
    } else {
        FilterSpec::new(FilterKind::BandlimitMb, 0.0).with_cutoff(b)
    };
    backproject_and_filter(g, slice_mass(g), 1.0, 1.0, Some(field_filter), &cfg, x, u)
}

/// `n = 1` filtered back projection written with the Hilbert transform of
/// the derivative of the data.
pub fn invert_hilbert_form(g: &FocalStack, cfg: &ReconConfig, x: &[Grid], u: &[Grid]) -> Result<Field> {
    if g.n != 1 {
        return Err(Error::Domain("the Hilbert form applies to n=1 data".into()));
    }
    let cfg = ReconConfig {
        beta: 0.0,
        ..cfg.clone()
    };
    check_common(g, &cfg, x, u)?;
    let b = cfg.cutoff(&x[0]);
    let d = FilterSpec::new(FilterKind::Derivative, 0.0).with_cutoff(b).with_pad(cfg.pad);
    let hil = FilterSpec::new(FilterKind::Hilbert, 0.0).with_pad(cfg.pad);
    let h = apply_filter_stack(&apply_filter_stack(g, &d)?, &hil)?;
    backproject_and_filter(&h, 0.0, 0.0, 1.0 / (2.0 * PI), None, &cfg, x, u)
}

/// `n = 2` filtered back projection written with the Laplacian of the data.
pub fn invert_laplacian_form(g: &FocalStack, cfg: &ReconConfig, x: &[Grid], u: &[Grid]) -> Result<Field> {
    if g.n != 2 {
        return Err(Error::Domain("the Laplacian form applies to n=2 data".into()));
    }
    let cfg = ReconConfig {
        beta: 0.0,
        ..cfg.clone()
    };
    check_common(g, &cfg, x, u)?;
    let b = cfg.cutoff(&x[0]);
    let lap = FilterSpec::new(FilterKind::Laplacian, 0.0).with_cutoff(b).with_pad(cfg.pad);
    let h = apply_filter_stack(g, &lap)?;
    backproject_and_filter(&h, 0.0, 0.0, -1.0 / (4.0 * PI * PI), None, &cfg, x, u)
}

fn data_filter(g: &FocalStack, spec: FilterSpec, b: f64, pad: usize) -> Result<FocalStack> {
    if spec.beta == 0.0 {
        return Ok(g.clone());
    }
    let spec = if spec.beta < 0.0 { spec.with_cutoff(b) } else { spec };
    apply_filter_stack(g, &spec.with_pad(pad))
}

/// Mean over slices of the integral of each slice. Every slice of a
/// photography stack carries the total mass of the field.
fn slice_mass(g: &FocalStack) -> f64 {
    let cell: f64 = g.xbar.iter().map(|b| b.spacing).product();
    g.values.iter().sum::<f64>() * cell / g.schedule.len() as f64
}

/// Weighted back projection of already filtered data `h`, scaled by `scale`,
/// followed by the optional field filter. With a field filter the back
/// projection runs on a grid `margin` times larger, the filter is applied
/// circularly, the zero-frequency bin (which a power filter cannot recover)
/// is set from `mass`, and the centre is kept.
#[allow(clippy::too_many_arguments)]
fn backproject_and_filter(
    h: &FocalStack,
    mass: f64,
    beta: f64,
    scale: f64,
    field_filter: Option<FilterSpec>,
    cfg: &ReconConfig,
    x: &[Grid],
    u: &[Grid],
) -> Result<Field> {
    let n = h.n;
    let margin = if field_filter.is_some() { cfg.margin_for(n) } else { 1 };
    let widen = |g: &Grid| -> Result<(Grid, usize)> {
        let extra = g.count * (margin - 1) / 2;
        Ok((
            Grid::new(g.count + 2 * extra, g.spacing, g.origin - extra as f64 * g.spacing)?,
            extra,
        ))
    };
    let xe: Vec<(Grid, usize)> = x.iter().map(widen).collect::<Result<_>>()?;
    let ue: Vec<(Grid, usize)> = u.iter().map(widen).collect::<Result<_>>()?;
    let xg: Vec<Grid> = xe.iter().map(|p| p.0).collect();
    let ug: Vec<Grid> = ue.iter().map(|p| p.0).collect();
    // pull the field band limit back onto each slice so the back projection
    // does not alias content the field filter would amplify
    let limited;
    let h = match (&field_filter, field_filter.and_then(|f| f.cutoff_b)) {
        (Some(_), Some(b)) => {
            let reach = |a: f64| if n == 1 { a.hypot(1.0 - a) } else { a.abs().max((1.0 - a).abs()) };
            limited = bandlimit_slices(h, |a| b / reach(a), cfg.pad)?;
            &limited
        }
        _ => h,
    };
    let step = mean_step(&h.schedule);
    let mut bp = backproject(h, &xg, &ug, |a| scale * dual_weight(n, a, beta, step))?;
    if n == 1 && cfg.tail_completion {
        add_range_completion(&mut bp, h, beta, scale)?;
    }
    let Some(spec) = field_filter else {
        return Ok(bp);
    };
    let mut filtered = apply_filter_field(&bp, &spec.with_pad(1))?;
    let cell = filtered.cell();
    let shift = (mass - filtered.values.iter().sum::<f64>() * cell) / (filtered.len() as f64 * cell);
    filtered.values.iter_mut().for_each(|v| *v += shift);
    if margin == 1 {
        return Ok(filtered);
    }
    crop(&filtered, &xe, &ue, x, u)
}

fn crop(f: &Field, xe: &[(Grid, usize)], ue: &[(Grid, usize)], x: &[Grid], u: &[Grid]) -> Result<Field> {
    let mut out = Field::zeros(x.to_vec(), u.to_vec())?;
    if f.n == 1 {
        let nu_e = ue[0].0.count;
        let (ox, ou) = (xe[0].1, ue[0].1);
        let nu = u[0].count;
        for i in 0..x[0].count {
            for j in 0..nu {
                out.values[i * nu + j] = f.values[(i + ox) * nu_e + j + ou];
            }
        }
        return Ok(out);
    }
    let se: Vec<usize> = f.shape();
    let so: Vec<usize> = out.shape();
    let off = [xe[0].1, xe[1].1, ue[0].1, ue[1].1];
    let mut idx = [0usize; 4];
    for v in out.values.iter_mut() {
        let src = ((((idx[0] + off[0]) * se[1] + idx[1] + off[1]) * se[2] + idx[2] + off[2]) * se[3]) + idx[3] + off[3];
        *v = f.values[src];
        for a in (0..4).rev() {
            idx[a] += 1;
            if idx[a] < so[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(out)
}

/// Back projection over the alpha range beyond both ends of an `n = 1`
/// schedule that brackets `[0, 1]`.
///
/// In `e = 1/alpha` the rescaled filtered slices
/// `H(y, e) = |alpha|^(1 + gamma) h(alpha, alpha y)`, `gamma = 1 - beta`, are
/// smooth through `e = 0` and the weighted measure becomes
/// `(1 + (1 - e)^2)^(-beta/2) de`. The missing range is the interval between
/// the reciprocals of the end nodes; `H` is interpolated linearly in `e`
/// between the two end slices and integrated with Gauss-Legendre.
fn add_range_completion(bp: &mut Field, h: &FocalStack, beta: f64, scale: f64) -> Result<()> {
    let s = &h.schedule;
    let (first, last) = (s.alphas[0], s.alphas[s.len() - 1]);
    if !(first < 0.0 && last > 1.0) {
        return Ok(());
    }
    let gamma = 1.0 - beta;
    let (e0, e1) = (1.0 / first, 1.0 / last);
    let quad = GaussLegendre::new(TAIL_NODES.try_into().expect("nonzero node count"));
    // (e, weight for the first-node slice, weight for the last-node slice)
    let nodes: Vec<(f64, f64, f64)> = quad
        .iter()
        .map(|(t, w)| {
            let e = e0 + (t + 1.0) / 2.0 * (e1 - e0);
            let c = scale * w * (e1 - e0) / 2.0 * (1.0 + (1.0 - e) * (1.0 - e)).powf(-beta / 2.0);
            let lam = (e - e0) / (e1 - e0);
            (e, c * (1.0 - lam), c * lam)
        })
        .collect();
    let ends = [
        (first, first.abs().powf(1.0 + gamma), h.slice(0)),
        (last, last.abs().powf(1.0 + gamma), h.slice(s.len() - 1)),
    ];
    let (gx, gu) = (bp.x[0], bp.u[0]);
    let xb = h.xbar[0];
    let nu = gu.count;
    let sample = |slice: &[f64], t: f64| match xb.stencil(t) {
        Some(st) => (1.0 - st.w) * slice[st.i] + st.w * slice[st.i + 1],
        None => 0.0,
    };
    bp.values.par_chunks_mut(nu).enumerate().for_each(|(i, row)| {
        let x = gx.coord(i);
        for (j, v) in row.iter_mut().enumerate() {
            let uj = gu.coord(j);
            let mut acc = 0.0;
            for &(e, c0, c1) in &nodes {
                let y = x - uj + e * uj;
                let (a0, m0, h0) = ends[0];
                let (a1, m1, h1) = ends[1];
                acc += c0 * m0 * sample(h0, a0 * y) + c1 * m1 * sample(h1, a1 * y);
            }
            *v += acc;
        }
    });
    Ok(())
}

/// Inverse of the two-parameter transform. Every stage of the pipeline
/// (per-axis data filter, product weights, per-axis field filter) factors over
/// the two axes, so it runs as the `n = 1` inversion along `(alpha2, xbar2)`
/// for each `(alpha1, xbar1)` and then along `(alpha1, xbar1)`.
pub fn invert_pbar(g: &BarStack, cfg: &ReconConfig, x: &[Grid], u: &[Grid]) -> Result<Field> {
    check_beta(cfg.beta)?;
    check_schedule(&g.schedules[0])?;
    check_schedule(&g.schedules[1])?;
    check_targets(2, x, u)?;
    let cfg1 = ReconConfig {
        method: Method::General,
        assume_lambertian: false,
        ..cfg.clone()
    };
    let [s1, s2] = &g.schedules;
    let (k1n, k2n) = (s1.len(), s2.len());
    let (m1, m2) = (g.xbar[0].count, g.xbar[1].count);
    let plane2 = x[1].count * u[1].count;
    // stage A: (k1, m1) rows -> [k1][m1][x2][u2]
    let rows: Vec<Vec<f64>> = (0..k1n * m1)
        .into_par_iter()
        .map(|r| {
            let (k1, i1) = (r / m1, r % m1);
            let mut vals = vec![0.0; k2n * m2];
            for k2 in 0..k2n {
                let off = ((k1 * k2n + k2) * m1 + i1) * m2;
                vals[k2 * m2..(k2 + 1) * m2].copy_from_slice(&g.values[off..off + m2]);
            }
            let st = FocalStack::new(s2.clone(), vec![g.xbar[1]], vals)?;
            Ok(invert_general(&st, &cfg1, &x[1..], &u[1..])?.values)
        })
        .collect::<Result<_>>()?;
    // stage B: each (x2, u2) fibre -> (x1, u1) plane
    let planes: Vec<Vec<f64>> = (0..plane2)
        .into_par_iter()
        .map(|p| {
            let mut vals = vec![0.0; k1n * m1];
            for (r, row) in rows.iter().enumerate() {
                vals[r] = row[p];
            }
            let st = FocalStack::new(s1.clone(), vec![g.xbar[0]], vals)?;
            Ok(invert_general(&st, &cfg1, &x[..1], &u[..1])?.values)
        })
        .collect::<Result<_>>()?;
    let mut out = Field::zeros(x.to_vec(), u.to_vec())?;
    let (nx2, nu1, nu2) = (x[1].count, u[0].count, u[1].count);
    for (p, plane) in planes.iter().enumerate() {
        let (i2, j2) = (p / nu2, p % nu2);
        for i1 in 0..x[0].count {
            for j1 in 0..nu1 {
                out.values[((i1 * nx2 + i2) * nu1 + j1) * nu2 + j2] = plane[i1 * nu1 + j1];
            }
        }
    }
    Ok(out)
}
