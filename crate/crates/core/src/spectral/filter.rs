use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fft::{crop_real, fft_axes, for_each_index, freq, pad_real};
use crate::error::{Error, Result};
use crate::grid::{BarStack, Field, FocalStack};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    /// `|xi|^(-beta)`
    Riesz,
    /// `|xi_x|^(-beta) |xi_u|^(-beta)`
    CoupledRiesz,
    /// `prod_i |xibar_i|^(-beta)` on two-parameter data
    BarRiesz,
    /// `prod_i |(xi_xi, xi_ui)|^(-beta)` on `n = 2` fields
    BarCoupledRiesz,
    /// `-i sgn(xibar_1)`
    Hilbert,
    /// `-4 pi^2 |xi|^2`
    Laplacian,
    /// `|xi|^2 1{|xi| < b}`
    BandlimitHb,
    /// `|xi_x| |xi_u| 1{|xi_x| < b, |xi_u| < b}`
    BandlimitMb,
    /// `2 pi i xibar_1`, the first derivative along the first data axis
    Derivative,
}

/// A frequency-domain multiplier. Acting on a field it uses every axis;
/// acting on stacks it uses the `xbar` axes of each alpha slice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub kind: FilterKind,
    #[serde(default)]
    pub beta: f64,
    /// Band limit; applied to negative-order potentials and to the
    /// Laplacian/derivative when set. Required by the `bandlimit_*` kinds.
    #[serde(default)]
    pub cutoff_b: Option<f64>,
    /// Zero padding factor per filtered axis; 1 filters circularly.
    #[serde(default = "one")]
    pub pad: usize,
}

fn one() -> usize {
    1
}

impl FilterSpec {
    pub fn new(kind: FilterKind, beta: f64) -> Self {
        FilterSpec {
            kind,
            beta,
            cutoff_b: None,
            pad: 1,
        }
    }

    pub fn riesz(beta: f64) -> Self {
        FilterSpec::new(FilterKind::Riesz, beta)
    }

    pub fn coupled_riesz(beta: f64) -> Self {
        FilterSpec::new(FilterKind::CoupledRiesz, beta)
    }

    pub fn with_cutoff(mut self, b: f64) -> Self {
        self.cutoff_b = Some(b);
        self
    }

    pub fn with_pad(mut self, pad: usize) -> Self {
        self.pad = pad.max(1);
        self
    }
}

/// What the filter acts on; decides how the frequency vector is grouped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Target {
    Field(usize),
    Stack(usize),
    Bar,
}

impl Target {
    fn validate(self, spec: &FilterSpec) -> Result<()> {
        use FilterKind::*;
        let b = spec.beta;
        if !b.is_finite() {
            return Err(Error::Domain("filter order must be finite".into()));
        }
        let bad = |msg: String| Err(Error::Domain(msg));
        match (spec.kind, self) {
            (Riesz, Target::Field(n)) if b >= 2.0 * n as f64 => bad(format!("riesz order {b} >= {} on a field", 2 * n)),
            (Riesz, Target::Stack(n)) if b >= n as f64 => bad(format!("riesz order {b} >= {n} on a stack")),
            (Riesz, Target::Bar) => bad("use bar_riesz on two-parameter data".into()),
            (CoupledRiesz, Target::Field(_)) if b >= 2.0 => bad(format!("coupled riesz order {b} >= 2")),
            (CoupledRiesz, t) | (BandlimitMb, t) if !matches!(t, Target::Field(_)) => {
                bad("coupled symbols act on fields".into())
            }
            (BarRiesz, t) if t != Target::Bar => bad("bar_riesz acts on two-parameter data".into()),
            (BarRiesz, _) if b >= 1.0 => bad(format!("bar_riesz order {b} >= 1")),
            (BarCoupledRiesz, t) if t != Target::Field(2) => bad("bar_coupled_riesz acts on n=2 fields".into()),
            (BarCoupledRiesz, _) if b >= 2.0 => bad(format!("bar_coupled_riesz order {b} >= 2")),
            (BandlimitHb, _) | (BandlimitMb, _) if spec.cutoff_b.is_none() => {
                bad("band-limited kernels need cutoff_b".into())
            }
            _ => {
                if let Some(c) = spec.cutoff_b {
                    if !(c > 0.0) {
                        return bad(format!("cutoff_b must be positive, got {c}"));
                    }
                }
                Ok(())
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `r^(-beta)` with the zero bin projected out for `beta > 0` and the band
/// limit applied for `beta < 0`.
fn power(r: f64, beta: f64, cutoff: Option<f64>) -> f64 {
    if beta == 0.0 {
        return 1.0;
    }
    if beta > 0.0 {
        return if r == 0.0 { 0.0 } else { r.powf(-beta) };
    }
    match cutoff {
        Some(b) if r >= b => 0.0,
        _ => r.powf(-beta),
    }
}

fn inside(r: f64, cutoff: Option<f64>) -> bool {
    cutoff.is_none_or(|b| r < b)
}

/// Symbol at frequency `xi` (filtered axes only); `nyq[a]` marks the
/// unpaired Nyquist bin of an even-length axis.
fn symbol(spec: &FilterSpec, target: Target, xi: &[f64], nyq: &[bool]) -> Complex64 {
    use FilterKind::*;
    let re = |v: f64| Complex64::new(v, 0.0);
    let b = spec.cutoff_b;
    let (xs, us): (&[f64], &[f64]) = match target {
        Target::Field(n) => (&xi[..n], &xi[n..]),
        _ => (xi, &[]),
    };
    match spec.kind {
        Riesz => re(power(norm(xi), spec.beta, b)),
        CoupledRiesz => {
            let (rx, ru) = (norm(xs), norm(us));
            if spec.beta < 0.0 && !(inside(rx, b) && inside(ru, b)) {
                return re(0.0);
            }
            re(power(rx, spec.beta, None) * power(ru, spec.beta, None))
        }
        BarRiesz => re(xi.iter().map(|v| power(v.abs(), spec.beta, b)).product()),
        BarCoupledRiesz => re((0..2)
            .map(|i| power(xs[i].hypot(us[i]), spec.beta, b))
            .product()),
        Hilbert => {
            if nyq[0] {
                return re(0.0);
            }
            if xi[0] == 0.0 {
                return re(0.0);
            }
            Complex64::new(0.0, -xi[0].signum())
        }
        Derivative => {
            if nyq[0] || !inside(xi[0].abs(), b) {
                return re(0.0);
            }
            Complex64::new(0.0, 2.0 * PI * xi[0])
        }
        Laplacian => {
            let r = norm(xi);
            if !inside(r, b) {
                return re(0.0);
            }
            re(-4.0 * PI * PI * r * r)
        }
        BandlimitHb => {
            let r = norm(xi);
            re(if inside(r, b) { r * r } else { 0.0 })
        }
        BandlimitMb => {
            let (rx, ru) = (norm(xs), norm(us));
            re(if inside(rx, b) && inside(ru, b) { rx * ru } else { 0.0 })
        }
    }
}

/// Filters the trailing `spacings.len()` axes of `values` (shape `shape`),
/// batching over the leading axes.
fn filter_trailing(values: &[f64], shape: &[usize], spacings: &[f64], spec: &FilterSpec, target: Target) -> Vec<f64> {
    let nf = spacings.len();
    let lead = shape.len() - nf;
    let fshape = &shape[lead..];
    let padded: Vec<usize> = fshape.iter().map(|&n| n * spec.pad.max(1)).collect();
    let plen: usize = padded.iter().product();
    let mut sym = vec![Complex64::new(0.0, 0.0); plen];
    let mut xi = vec![0.0; nf];
    let mut nyq = vec![false; nf];
    for_each_index(&padded, |lin, idx| {
        for a in 0..nf {
            xi[a] = freq(idx[a], padded[a], spacings[a]);
            nyq[a] = padded[a] % 2 == 0 && idx[a] == padded[a] / 2;
        }
        sym[lin] = symbol(spec, target, &xi, &nyq);
    });
    let axes: Vec<usize> = (0..nf).collect();
    let chunk: usize = fshape.iter().product();
    let mut out = vec![0.0; values.len()];
    out.par_chunks_mut(chunk)
        .zip(values.par_chunks(chunk))
        .for_each(|(dst, src)| {
            let mut buf = pad_real(src, fshape, &padded);
            fft_axes(&mut buf, &padded, &axes, false);
            for (v, s) in buf.iter_mut().zip(&sym) {
                *v *= s;
            }
            fft_axes(&mut buf, &padded, &axes, true);
            dst.copy_from_slice(&crop_real(&buf, &padded, fshape));
        });
    out
}

pub fn apply_filter_field(f: &Field, spec: &FilterSpec) -> Result<Field> {
    let target = Target::Field(f.n);
    target.validate(spec)?;
    let spacings: Vec<f64> = f.x.iter().chain(f.u.iter()).map(|g| g.spacing).collect();
    let v = filter_trailing(&f.values, &f.shape(), &spacings, spec, target);
    f.with_values(v)
}

pub fn apply_filter_stack(g: &FocalStack, spec: &FilterSpec) -> Result<FocalStack> {
    let target = Target::Stack(g.n);
    target.validate(spec)?;
    let spacings: Vec<f64> = g.xbar.iter().map(|b| b.spacing).collect();
    let v = filter_trailing(&g.values, &g.shape(), &spacings, spec, target);
    g.with_values(v)
}

pub fn apply_filter_bar(g: &BarStack, spec: &FilterSpec) -> Result<BarStack> {
    let target = Target::Bar;
    target.validate(spec)?;
    let spacings = [g.xbar[0].spacing, g.xbar[1].spacing];
    let v = filter_trailing(&g.values, &g.shape(), &spacings, spec, target);
    BarStack::new(g.schedules.clone(), g.xbar, v)
}

/// Zeroes, slice by slice, the `xbar` frequencies with `|xibar| >= cutoff(alpha)`.
pub fn bandlimit_slices(g: &FocalStack, cutoff: impl Fn(f64) -> f64 + Sync, pad: usize) -> Result<FocalStack> {
    let fshape: Vec<usize> = g.xbar.iter().map(|b| b.count).collect();
    let padded: Vec<usize> = fshape.iter().map(|&n| n * pad.max(1)).collect();
    let spacings: Vec<f64> = g.xbar.iter().map(|b| b.spacing).collect();
    let mut radius = vec![0.0; padded.iter().product()];
    for_each_index(&padded, |lin, idx| {
        let xi: Vec<f64> = (0..idx.len()).map(|a| freq(idx[a], padded[a], spacings[a])).collect();
        radius[lin] = norm(&xi);
    });
    let axes: Vec<usize> = (0..fshape.len()).collect();
    let mut out = vec![0.0; g.values.len()];
    out.par_chunks_mut(g.slice_len())
        .enumerate()
        .for_each(|(k, dst)| {
            let b = cutoff(g.schedule.alphas[k]);
            let mut buf = pad_real(g.slice(k), &fshape, &padded);
            fft_axes(&mut buf, &padded, &axes, false);
            for (v, &r) in buf.iter_mut().zip(&radius) {
                if r >= b {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
            fft_axes(&mut buf, &padded, &axes, true);
            dst.copy_from_slice(&crop_real(&buf, &padded, &fshape));
        });
    g.with_values(out)
}
