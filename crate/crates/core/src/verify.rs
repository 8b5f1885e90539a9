//! Numerical checks of the transform identities and inversion formulas,
//! collected into a JSON report.
//!
//! Every check measures one error and compares it against the tolerance
//! registered next to it in [`REGISTRY`]. A check that returns an error is
//! recorded as failed with the message; the suite always runs to the end.

use std::f64::consts::PI;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AlphaSchedule, Field, FocalStack, Grid};
use crate::inversion::{
    invert_bpf, invert_fbp, invert_general, invert_hilbert_form, invert_laplacian_form, invert_pbar, ReconConfig,
};
use crate::phantoms::{make_phantom, PhantomSpec};
use crate::spectral::{apply_filter_field, convolve_linear, fourier_slice_check, FilterSpec};
use crate::transforms::{backproject, classic_radon_2d, coupled_radon, dual_p, forward_p, forward_pbar, xbar_grid_for};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Smoke,
    Full,
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoke" => Ok(Level::Smoke),
            "full" => Ok(Level::Full),
            other => Err(Error::Domain(format!("unknown level {other:?} (smoke or full)"))),
        }
    }
}

/// Which side of the tolerance a passing measurement lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub paper_ref: String,
    pub measured_error: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub passed: bool,
    pub runtime_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub thread_count: usize,
    pub timestamp: u64,
    pub seed: u64,
    pub level: Level,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckReport>,
    pub overall_passed: bool,
    pub environment: Environment,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// The report with timestamp and runtimes zeroed, for comparing runs.
    pub fn without_timings(&self) -> VerifyReport {
        let mut r = self.clone();
        r.environment.timestamp = 0;
        for c in &mut r.checks {
            c.runtime_ms = 0;
        }
        r
    }
}

/// A measured value plus an optional side condition that must also hold.
#[derive(Clone, Debug, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub holds: bool,
    pub detail: Option<String>,
}

impl From<f64> for Measured {
    fn from(value: f64) -> Self {
        Measured {
            value,
            holds: true,
            detail: None,
        }
    }
}

pub struct Check {
    pub name: &'static str,
    pub reference: &'static str,
    pub tolerance: f64,
    pub bound: Bound,
    /// Runs at the smoke level too (always at the full level).
    pub smoke: bool,
    pub run: fn(&mut Context) -> Result<Measured>,
}

impl Check {
    fn passes(&self, m: &Measured) -> bool {
        let within = match self.bound {
            Bound::AtMost => m.value <= self.tolerance,
            Bound::AtLeast => m.value >= self.tolerance,
        };
        m.holds && m.value.is_finite() && within
    }
}

pub static REGISTRY: &[Check] = &[
    Check {
        name: "adjoint_n1",
        reference: "dual operator",
        tolerance: 1e-12,
        bound: Bound::AtMost,
        smoke: true,
        run: check_adjoint_n1,
    },
    Check {
        name: "adjoint_n2",
        reference: "dual operator",
        tolerance: 1e-12,
        bound: Bound::AtMost,
        smoke: false,
        run: check_adjoint_n2,
    },
    Check {
        name: "coupled_radon_matches_forward",
        reference: "equivalence with the coupled Radon transform",
        tolerance: 1e-12,
        bound: Bound::AtMost,
        smoke: true,
        run: check_coupled_radon,
    },
    Check {
        name: "photography_matches_scaled_radon",
        reference: "relation to the classic Radon transform",
        tolerance: 1e-3,
        bound: Bound::AtMost,
        smoke: true,
        run: check_classic_radon,
    },
    Check {
        name: "fourier_slice_n1",
        reference: "Fourier slice theorem",
        tolerance: 1e-3,
        bound: Bound::AtMost,
        smoke: true,
        run: check_fourier_slice_n1,
    },
    Check {
        name: "fourier_slice_n2",
        reference: "Fourier slice theorem",
        tolerance: 5e-3,
        bound: Bound::AtMost,
        smoke: false,
        run: check_fourier_slice_n2,
    },
    Check {
        name: "convolution_theorem",
        reference: "convolution theorem",
        tolerance: 1e-2,
        bound: Bound::AtMost,
        smoke: true,
        run: check_convolution,
    },
    Check {
        name: "dual_convolution",
        reference: "convolution property of the dual operator",
        tolerance: 1e-2,
        bound: Bound::AtMost,
        smoke: true,
        run: check_dual_convolution,
    },
    Check {
        name: "normal_operator_n1",
        reference: "normal operator",
        tolerance: 0.05,
        bound: Bound::AtMost,
        smoke: false,
        run: check_normal_operator,
    },
    Check {
        name: "riesz_inverse",
        reference: "Riesz potential",
        tolerance: 1e-10,
        bound: Bound::AtMost,
        smoke: true,
        run: check_riesz_inverse,
    },
    Check {
        name: "coupled_riesz_inverse",
        reference: "coupled Riesz potential",
        tolerance: 1e-10,
        bound: Bound::AtMost,
        smoke: true,
        run: check_coupled_riesz_inverse,
    },
    Check {
        name: "fbp_round_trip_n1",
        reference: "inversion formula, beta = 0",
        tolerance: 0.05,
        bound: Bound::AtMost,
        smoke: true,
        run: check_fbp_n1,
    },
    Check {
        name: "bpf_round_trip_n1",
        reference: "inversion formula, beta = 1",
        tolerance: 0.06,
        bound: Bound::AtMost,
        smoke: true,
        run: check_bpf_n1,
    },
    Check {
        name: "beta_spread_n1",
        reference: "inversion formula",
        tolerance: 0.03,
        bound: Bound::AtMost,
        smoke: true,
        run: check_beta_spread,
    },
    Check {
        name: "fbp_round_trip_lambertian",
        reference: "inversion formula, beta = 0, n = 2",
        tolerance: 0.10,
        bound: Bound::AtMost,
        smoke: false,
        run: check_fbp_n2,
    },
    Check {
        name: "bpf_round_trip_lambertian",
        reference: "inversion formula, beta = 1, n = 2",
        tolerance: 0.12,
        bound: Bound::AtMost,
        smoke: false,
        run: check_bpf_n2,
    },
    Check {
        name: "hilbert_form_matches_fbp",
        reference: "Hilbert form of filtered back projection",
        tolerance: 1e-6,
        bound: Bound::AtMost,
        smoke: true,
        run: check_hilbert_form,
    },
    Check {
        name: "laplacian_form_matches_fbp",
        reference: "Laplacian form of filtered back projection",
        tolerance: 1e-6,
        bound: Bound::AtMost,
        smoke: false,
        run: check_laplacian_form,
    },
    Check {
        name: "two_slope_breaks_lambertian_inversion",
        reference: "Lambertian assumption",
        tolerance: 0.30,
        bound: Bound::AtLeast,
        smoke: false,
        run: check_two_slope,
    },
    Check {
        name: "pbar_separable",
        reference: "two-parameter transform",
        tolerance: 1e-10,
        bound: Bound::AtMost,
        smoke: false,
        run: check_pbar_separable,
    },
    Check {
        name: "pbar_round_trip",
        reference: "inversion of the two-parameter transform",
        tolerance: 0.10,
        bound: Bound::AtMost,
        smoke: false,
        run: check_pbar_round_trip,
    },
    Check {
        name: "resolution_convergence_n1",
        reference: "inversion formula",
        tolerance: 1.5,
        bound: Bound::AtLeast,
        smoke: true,
        run: check_convergence,
    },
    Check {
        name: "repeat_runs_identical",
        reference: "reproducibility",
        tolerance: 0.0,
        bound: Bound::AtMost,
        smoke: true,
        run: check_repeatable,
    },
];

/// Runs every registered check that belongs to `level`.
pub fn run_suite(level: Level, seed: u64) -> VerifyReport {
    let checks: Vec<&Check> = REGISTRY.iter().filter(|c| level == Level::Full || c.smoke).collect();
    run_checks(&checks, level, seed)
}

pub fn run_checks(checks: &[&Check], level: Level, seed: u64) -> VerifyReport {
    let mut ctx = Context::new(level, seed);
    let mut out = Vec::with_capacity(checks.len());
    for check in checks {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| (check.run)(&mut ctx)));
        let runtime_ms = start.elapsed().as_millis() as u64;
        let report = |value: f64, passed: bool, detail: Option<String>| CheckReport {
            name: check.name.to_string(),
            paper_ref: check.reference.to_string(),
            measured_error: value,
            tolerance: check.tolerance,
            bound: check.bound,
            passed,
            runtime_ms,
            detail,
        };
        out.push(match result {
            Ok(Ok(m)) => report(m.value, check.passes(&m), m.detail),
            Ok(Err(e)) => report(f64::NAN, false, Some(e.to_string())),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "check panicked".into());
                report(f64::NAN, false, Some(msg))
            }
        });
    }
    VerifyReport {
        overall_passed: out.iter().all(|c| c.passed),
        checks: out,
        environment: Environment {
            version: env!("CARGO_PKG_VERSION").to_string(),
            thread_count: rayon::current_num_threads(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seed,
            level,
        },
    }
}

/// Shared inputs reused across checks within one run.
pub struct Context {
    pub level: Level,
    pub seed: u64,
    gaussian_n1: Option<RoundTrip>,
    lambertian: Option<RoundTrip>,
    fbp_lambertian: Option<Field>,
}

struct RoundTrip {
    field: Field,
    stack: FocalStack,
}

impl Context {
    pub fn new(level: Level, seed: u64) -> Self {
        Context {
            level,
            seed,
            gaussian_n1: None,
            lambertian: None,
            fbp_lambertian: None,
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    fn full(&self) -> bool {
        self.level == Level::Full
    }

    fn gaussian_n1(&mut self) -> Result<&RoundTrip> {
        if self.gaussian_n1.is_none() {
            let (count, width, nodes) = if self.full() { (128, 1.0, 257) } else { (32, 2.0, 129) };
            self.gaussian_n1 = Some(gaussian_round_trip(count, 8.0, width, nodes)?);
        }
        Ok(self.gaussian_n1.as_ref().expect("set above"))
    }

    fn lambertian(&mut self) -> Result<&RoundTrip> {
        if self.lambertian.is_none() {
            self.lambertian = Some(lambertian_round_trip(false)?);
        }
        Ok(self.lambertian.as_ref().expect("set above"))
    }

    fn fbp_lambertian(&mut self) -> Result<&Field> {
        if self.fbp_lambertian.is_none() {
            let rt = self.lambertian()?;
            let r = invert_fbp(&rt.stack, &ReconConfig::default().lambertian(), &rt.field.x, &rt.field.u)?;
            self.fbp_lambertian = Some(r);
        }
        Ok(self.fbp_lambertian.as_ref().expect("set above"))
    }
}

/// `||a - b|| / ||b||`.
pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn sym(count: usize, extent: f64) -> Result<Grid> {
    Grid::symmetric(count, extent / count as f64)
}

fn gaussian(grid: Grid, n: usize, width: f64) -> Result<Field> {
    let g = vec![grid; n];
    make_phantom(&PhantomSpec::Gaussian { center: vec![], width }, &g, &g)
}

fn gaussian_round_trip(count: usize, extent: f64, width: f64, nodes: usize) -> Result<RoundTrip> {
    let g = sym(count, extent)?;
    let field = gaussian(g, 1, width)?;
    let s = AlphaSchedule::symmetric_range(8.0, (nodes - 1) / 2)?;
    let xb = xbar_grid_for(&s, &g, &g, 2)?;
    let stack = forward_p(&field, &s, &[xb])?;
    Ok(RoundTrip { field, stack })
}

/// Single- or two-slope field at 48^4 with its stack on 65 nodes over [-4, 5].
fn lambertian_round_trip(two: bool) -> Result<RoundTrip> {
    let g = sym(48, 8.0)?;
    let grids = [g, g];
    let spec = if two {
        PhantomSpec::TwoSlope {
            slopes: [0.5, -0.5],
            width: 1.5,
            u_taper: 1.0,
        }
    } else {
        PhantomSpec::LambertianSlope {
            slope: 0.5,
            width: 1.5,
            u_taper: 1.0,
        }
    };
    let field = make_phantom(&spec, &grids, &grids)?;
    let s = AlphaSchedule::symmetric_range(4.0, 32)?;
    let xb = xbar_grid_for(&s, &g, &g, 1)?;
    let stack = forward_p(&field, &s, &[xb, xb])?;
    Ok(RoundTrip { field, stack })
}

/// Relative error over the samples whose every index lies in the middle half
/// of its axis.
pub fn central_half_error(rec: &Field, truth: &Field) -> f64 {
    let shape = truth.shape();
    let mut num = 0.0;
    let mut den = 0.0;
    for (lin, (r, t)) in rec.values.iter().zip(&truth.values).enumerate() {
        let mut rest = lin;
        let inside = shape.iter().rev().all(|&len| {
            let c = rest % len;
            rest /= len;
            c >= len / 4 && c < len - len / 4
        });
        if inside {
            num += (r - t) * (r - t);
            den += t * t;
        }
    }
    (num / den).sqrt()
}

fn random_values(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Largest `|<Pf, g> - <f, P* g>| / (||Pf|| ||g||)` over `pairs` random pairs,
/// with quadrature-weighted inner products on both sides.
pub fn adjoint_residual(
    x: &[Grid],
    u: &[Grid],
    schedule: &AlphaSchedule,
    xbar: &[Grid],
    pairs: usize,
    rng: &mut ChaCha8Rng,
    dual: impl Fn(&FocalStack, &[Grid], &[Grid]) -> Result<Field>,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let f = Field::zeros(x.to_vec(), u.to_vec())?;
        let f = f.with_values(random_values(rng, f.len()))?;
        let pf = forward_p(&f, schedule, xbar)?;
        let g = pf.with_values(random_values(rng, pf.len()))?;
        let cell: f64 = xbar.iter().map(|b| b.spacing).product();
        let m = pf.slice_len();
        let (mut lhs, mut npf, mut ng) = (0.0, 0.0, 0.0);
        for (k, w) in schedule.weights.iter().enumerate() {
            let (a, b) = (&pf.values[k * m..(k + 1) * m], &g.values[k * m..(k + 1) * m]);
            lhs += w * cell * a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
            npf += w * cell * a.iter().map(|p| p * p).sum::<f64>();
            ng += w * cell * b.iter().map(|q| q * q).sum::<f64>();
        }
        let back = dual(&g, x, u)?;
        let rhs = f.cell() * f.values.iter().zip(&back.values).map(|(p, q)| p * q).sum::<f64>();
        worst = worst.max((lhs - rhs).abs() / (npf.sqrt() * ng.sqrt()));
    }
    Ok(worst)
}

fn check_adjoint_n1(ctx: &mut Context) -> Result<Measured> {
    let g = sym(32, 4.0)?;
    let s = AlphaSchedule::uniform(-2.0, 3.0, 15)?;
    let xb = xbar_grid_for(&s, &g, &g, 2)?;
    let mut rng = ctx.rng(1);
    Ok(adjoint_residual(&[g], &[g], &s, &[xb], 20, &mut rng, dual_p)?.into())
}

fn check_adjoint_n2(ctx: &mut Context) -> Result<Measured> {
    let g = sym(8, 4.0)?;
    let s = AlphaSchedule::uniform(-2.0, 3.0, 7)?;
    let xb = xbar_grid_for(&s, &g, &g, 2)?;
    let mut rng = ctx.rng(2);
    Ok(adjoint_residual(&[g, g], &[g, g], &s, &[xb, xb], 20, &mut rng, dual_p)?.into())
}

fn check_coupled_radon(_: &mut Context) -> Result<Measured> {
    let g = sym(32, 8.0)?;
    let f = gaussian(g, 1, 1.0)?;
    let s = AlphaSchedule::uniform(-2.0, 3.0, 15)?;
    let xb = sym(32, 12.0)?;
    let stack = forward_p(&f, &s, &[xb])?;
    let peak = stack.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut worst: f64 = 0.0;
    for (k, &a) in s.alphas.iter().enumerate() {
        for i in 0..xb.count {
            let c = coupled_radon(&f, a, &[xb.coord(i)])?;
            worst = worst.max((c - stack.slice(k)[i]).abs());
        }
    }
    Ok((worst / peak).into())
}

fn check_classic_radon(_: &mut Context) -> Result<Measured> {
    let g = sym(128, 8.0)?;
    let f = gaussian(g, 1, 2.0)?;
    let mut worst: f64 = 0.0;
    for a in [-1.0, 0.5, 2.0] {
        let s = AlphaSchedule::with_weights(vec![a], vec![1.0])?;
        let xb = xbar_grid_for(&s, &g, &g, 1)?;
        let p = forward_p(&f, &s, &[xb])?;
        let rho = f64::hypot(a, 1.0 - a);
        let theta = [a / rho, (1.0 - a) / rho];
        let r: Vec<f64> = (0..xb.count)
            .map(|i| classic_radon_2d(&f, theta, xb.coord(i) / rho).map(|v| v / rho))
            .collect::<Result<_>>()?;
        worst = worst.max(rel_l2(&p.values, &r));
    }
    Ok(worst.into())
}

fn check_fourier_slice_n1(_: &mut Context) -> Result<Measured> {
    let f = gaussian(sym(128, 8.0)?, 1, 2.0)?;
    let mut worst: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        worst = worst.max(fourier_slice_check(&f, a)?);
    }
    Ok(worst.into())
}

fn check_fourier_slice_n2(_: &mut Context) -> Result<Measured> {
    let f = gaussian(sym(32, 6.0)?, 2, 2.0)?;
    let mut worst: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        worst = worst.max(fourier_slice_check(&f, a)?);
    }
    Ok(worst.into())
}

/// `P_alpha (f * h)` against `P_alpha f * P_alpha h` for two off-centre
/// Gaussians; both sides live on the same symmetric `xbar` lattice.
fn check_convolution(_: &mut Context) -> Result<Measured> {
    let g = sym(64, 8.0)?;
    let grids = [g];
    let f = make_phantom(
        &PhantomSpec::Gaussian {
            center: vec![0.5, -0.25],
            width: 1.0,
        },
        &grids,
        &grids,
    )?;
    let h = make_phantom(
        &PhantomSpec::Gaussian {
            center: vec![-0.25, 0.5],
            width: 1.2,
        },
        &grids,
        &grids,
    )?;
    let (fh, fg) = convolve_linear(&f.values, &[g, g], &h.values, &[g, g])?;
    let fh = Field::new(vec![fg[0]], vec![fg[1]], fh)?;
    let mut worst: f64 = 0.0;
    for a in [-1.0, 0.5, 2.0] {
        let s = AlphaSchedule::with_weights(vec![a], vec![1.0])?;
        let xb = xbar_grid_for(&s, &g, &g, 1)?;
        let pf = forward_p(&f, &s, &[xb])?;
        let ph = forward_p(&h, &s, &[xb])?;
        let (rhs, rg) = convolve_linear(&pf.values, &[xb], &ph.values, &[xb])?;
        let lhs = forward_p(&fh, &s, &rg)?;
        worst = worst.max(rel_l2(&lhs.values, &rhs));
    }
    Ok(worst.into())
}

/// `(P* g) * f` against `P*(g * P f)`, compared on the field grid. `P* g`
/// is formed on a grid three times wider so the convolution sees all of it
/// that reaches the comparison window.
///
/// `P*` here is the pixel-driven back projection, which evaluates each slice
/// at `alpha x + (1 - alpha) u`. The exact transpose spreads each slice
/// sample over a pixel footprint, and that bias alone is above a percent at
/// this size.
fn check_dual_convolution(_: &mut Context) -> Result<Measured> {
    let g = sym(32, 8.0)?;
    let f = gaussian(g, 1, 1.0)?;
    let s = AlphaSchedule::uniform(-2.0, 3.0, 41)?;
    let wide = Grid::symmetric(3 * g.count - 1, g.spacing)?;
    let xb = xbar_grid_for(&s, &wide, &wide, 2)?;
    // data: a Gaussian profile per slice, tapered in alpha
    let data: Vec<f64> = s
        .alphas
        .iter()
        .flat_map(|&a| {
            let amp = (-PI * ((a - 0.5) / 2.0).powi(2)).exp();
            xb.coords().into_iter().map(move |t| amp * (-PI * t * t / 2.0).exp())
        })
        .collect();
    let data = FocalStack::new(s.clone(), vec![xb], data)?;
    let back = backproject(&data, &[wide], &[wide], |_| 1.0)?;
    let (lhs, lg) = convolve_linear(&back.values, &[wide, wide], &f.values, &[g, g])?;
    let pf = forward_p(&f, &s, &[xb])?;
    let mut conv = Vec::new();
    let mut cg = xb;
    for k in 0..s.len() {
        let (c, grid) = convolve_linear(data.slice(k), &[xb], pf.slice(k), &[xb])?;
        conv.extend(c);
        cg = grid[0];
    }
    let conv = FocalStack::new(s, vec![cg], conv)?;
    let rhs = backproject(&conv, &[g], &[g], |_| 1.0)?;
    let lhs = window(&lhs, &lg, &g)?;
    Ok(rel_l2(&lhs, &rhs.values).into())
}

/// Samples of a square array on `lg x lg` at the points of `g x g`; both
/// grids share a spacing and `g` points sit on `lg` points.
fn window(values: &[f64], lg: &[Grid], g: &Grid) -> Result<Vec<f64>> {
    let off: Vec<usize> = lg
        .iter()
        .map(|l| {
            let p = l.position(g.origin).round();
            if p < 0.0 || p as usize + g.count > l.count {
                Err(Error::Shape("window lies outside the array".into()))
            } else {
                Ok(p as usize)
            }
        })
        .collect::<Result<_>>()?;
    let cols = lg[1].count;
    let mut out = Vec::with_capacity(g.count * g.count);
    for i in 0..g.count {
        for j in 0..g.count {
            out.push(values[(i + off[0]) * cols + j + off[1]]);
        }
    }
    Ok(out)
}

/// `P* P f` against `k_eps * f` with `k_eps(x, u) = ((x-u)^2 + eps^2)^(-1/2)`,
/// `eps` half the grid spacing; error relative to `P* P f`.
fn check_normal_operator(_: &mut Context) -> Result<Measured> {
    let g = sym(64, 8.0)?;
    let f = gaussian(g, 1, 1.0)?;
    let s = AlphaSchedule::symmetric_range(8.0, 128)?;
    let xb = xbar_grid_for(&s, &g, &g, 2)?;
    let normal = dual_p(&forward_p(&f, &s, &[xb])?, &[g], &[g])?;
    let eps = g.spacing / 2.0;
    let kg = Grid::symmetric(2 * g.count - 1, g.spacing)?;
    let kernel: Vec<f64> = kg
        .coords()
        .iter()
        .flat_map(|&x| kg.coords().into_iter().map(move |u| 1.0 / ((x - u).powi(2) + eps * eps).sqrt()))
        .collect();
    let (c, cg) = convolve_linear(&f.values, &[g, g], &kernel, &[kg, kg])?;
    let kf = window(&c, &cg, &g)?;
    let err: f64 = kf.iter().zip(&normal.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = normal.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((err / norm).into())
}

/// Sum of random cosines with both frequency components nonzero and below a
/// quarter of the lattice, so the field has no energy on the axes or near
/// Nyquist.
fn band_limited_field(rng: &mut ChaCha8Rng, g: Grid) -> Result<Field> {
    let period = g.count as f64 * g.spacing;
    let modes: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|_| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let kx = rng.gen_range(1..g.count / 4) as f64;
            let ku = sign * rng.gen_range(1..g.count / 4) as f64;
            (kx / period, ku / period, rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.5..1.0))
        })
        .collect();
    Field::from_fn(vec![g], vec![g], |x, u| {
        modes
            .iter()
            .map(|&(a, b, ph, amp)| amp * (2.0 * PI * (a * x[0] + b * u[0]) + ph).cos())
            .sum()
    })
}

fn riesz_pair(ctx: &mut Context, forward: FilterSpec, back: FilterSpec, stream: u64) -> Result<Measured> {
    let mut rng = ctx.rng(stream);
    let f = band_limited_field(&mut rng, sym(32, 8.0)?)?;
    let r = apply_filter_field(&apply_filter_field(&f, &forward)?, &back)?;
    Ok(rel_l2(&r.values, &f.values).into())
}

fn check_riesz_inverse(ctx: &mut Context) -> Result<Measured> {
    riesz_pair(ctx, FilterSpec::riesz(0.7), FilterSpec::riesz(-0.7), 3)
}

fn check_coupled_riesz_inverse(ctx: &mut Context) -> Result<Measured> {
    riesz_pair(ctx, FilterSpec::coupled_riesz(0.7), FilterSpec::coupled_riesz(-0.7), 4)
}

fn round_trip_n1(ctx: &mut Context, invert: impl Fn(&FocalStack, &[Grid], &[Grid]) -> Result<Field>) -> Result<f64> {
    let rt = ctx.gaussian_n1()?;
    let r = invert(&rt.stack, &rt.field.x, &rt.field.u)?;
    Ok(rel_l2(&r.values, &rt.field.values))
}

fn check_fbp_n1(ctx: &mut Context) -> Result<Measured> {
    Ok(round_trip_n1(ctx, |g, x, u| invert_fbp(g, &ReconConfig::default(), x, u))?.into())
}

fn check_bpf_n1(ctx: &mut Context) -> Result<Measured> {
    Ok(round_trip_n1(ctx, |g, x, u| invert_bpf(g, &ReconConfig::with_beta(1.0), x, u))?.into())
}

fn check_beta_spread(ctx: &mut Context) -> Result<Measured> {
    let rt = ctx.gaussian_n1()?;
    let recs: Vec<Vec<f64>> = [0.0, 0.5, 1.0, 1.5]
        .iter()
        .map(|&b| Ok(invert_general(&rt.stack, &ReconConfig::with_beta(b), &rt.field.x, &rt.field.u)?.values))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..recs.len() {
        for j in i + 1..recs.len() {
            worst = worst.max(rel_l2(&recs[i], &recs[j]));
        }
    }
    Ok(worst.into())
}

fn check_fbp_n2(ctx: &mut Context) -> Result<Measured> {
    let r = ctx.fbp_lambertian()?.clone();
    let rt = ctx.lambertian()?;
    Ok(central_half_error(&r, &rt.field).into())
}

fn check_bpf_n2(ctx: &mut Context) -> Result<Measured> {
    let rt = ctx.lambertian()?;
    let r = invert_bpf(&rt.stack, &ReconConfig::with_beta(1.0).lambertian(), &rt.field.x, &rt.field.u)?;
    Ok(central_half_error(&r, &rt.field).into())
}

fn check_hilbert_form(ctx: &mut Context) -> Result<Measured> {
    let rt = ctx.gaussian_n1()?;
    let cfg = ReconConfig::default();
    let a = invert_hilbert_form(&rt.stack, &cfg, &rt.field.x, &rt.field.u)?;
    let b = invert_fbp(&rt.stack, &cfg, &rt.field.x, &rt.field.u)?;
    Ok(rel_l2(&a.values, &b.values).into())
}

fn check_laplacian_form(ctx: &mut Context) -> Result<Measured> {
    let b = ctx.fbp_lambertian()?.clone();
    let rt = ctx.lambertian()?;
    let a = invert_laplacian_form(&rt.stack, &ReconConfig::default().lambertian(), &rt.field.x, &rt.field.u)?;
    Ok(rel_l2(&a.values, &b.values).into())
}

/// Two-slope error under the configuration used for the single-slope round
/// trip; the single-slope error must also be within its own tolerance.
fn check_two_slope(ctx: &mut Context) -> Result<Measured> {
    let single = {
        let r = ctx.fbp_lambertian()?.clone();
        central_half_error(&r, &ctx.lambertian()?.field)
    };
    let rt = lambertian_round_trip(true)?;
    let r = invert_fbp(&rt.stack, &ReconConfig::default().lambertian(), &rt.field.x, &rt.field.u)?;
    let two = central_half_error(&r, &rt.field);
    Ok(Measured {
        value: two,
        holds: single <= 0.10,
        detail: Some(format!("single-slope error {single:.4} (must be <= 0.10)")),
    })
}

/// Two-parameter stack of a product field against the product of the two
/// one-parameter stacks of its factors.
fn check_pbar_separable(ctx: &mut Context) -> Result<Measured> {
    let g = sym(16, 6.0)?;
    let mut rng = ctx.rng(5);
    let a = Field::zeros(vec![g], vec![g])?;
    let a = a.with_values(random_values(&mut rng, a.len()))?;
    let b = a.with_values(random_values(&mut rng, a.len()))?;
    let n = g.count;
    let f = Field::from_fn(vec![g, g], vec![g, g], |x, u| {
        let i = |c: f64| g.position(c).round() as usize;
        a.values[i(x[0]) * n + i(u[0])] * b.values[i(x[1]) * n + i(u[1])]
    })?;
    let s1 = AlphaSchedule::uniform(-2.0, 3.0, 5)?;
    let s2 = AlphaSchedule::uniform(-1.5, 2.5, 4)?;
    let xb = xbar_grid_for(&s1, &g, &g, 2)?;
    let bar = forward_pbar(&f, &[s1.clone(), s2.clone()], &[xb, xb])?;
    let pa = forward_p(&a, &s1, &[xb])?;
    let pb = forward_p(&b, &s2, &[xb])?;
    let m = xb.count;
    let mut expect = Vec::with_capacity(bar.len());
    for k1 in 0..s1.len() {
        for k2 in 0..s2.len() {
            for i in 0..m {
                for j in 0..m {
                    expect.push(pa.slice(k1)[i] * pb.slice(k2)[j]);
                }
            }
        }
    }
    Ok(rel_l2(&bar.values, &expect).into())
}

fn check_pbar_round_trip(_: &mut Context) -> Result<Measured> {
    let g = sym(32, 6.0)?;
    let grids = [g, g];
    let f = gaussian(g, 2, 2.0)?;
    let s = AlphaSchedule::uniform(-4.0, 5.0, 33)?;
    let xb = xbar_grid_for(&s, &g, &g, 1)?;
    let bar = forward_pbar(&f, &[s.clone(), s], &[xb, xb])?;
    let r = invert_pbar(&bar, &ReconConfig::default(), &grids, &grids)?;
    Ok(rel_l2(&r.values, &f.values).into())
}

/// Error ratio of the filtered back projection round trip when the grid
/// count and the alpha node count are both doubled.
fn check_convergence(ctx: &mut Context) -> Result<Measured> {
    let (count, width) = if ctx.full() { (64, 1.0) } else { (32, 2.0) };
    let fbp = |rt: &RoundTrip| -> Result<f64> {
        let r = invert_fbp(&rt.stack, &ReconConfig::default(), &rt.field.x, &rt.field.u)?;
        Ok(rel_l2(&r.values, &rt.field.values))
    };
    let coarse = fbp(&gaussian_round_trip(count, 8.0, width, 129)?)?;
    let fine = if ctx.full() {
        fbp(ctx.gaussian_n1()?)?
    } else {
        fbp(&gaussian_round_trip(2 * count, 8.0, width, 257)?)?
    };
    Ok(Measured {
        value: coarse / fine,
        holds: true,
        detail: Some(format!("coarse {coarse:.4e}, fine {fine:.4e}")),
    })
}

/// Runs a forward, dual and inversion pipeline twice in the current pool and
/// once on a single thread; reports the largest relative difference.
fn check_repeatable(_: &mut Context) -> Result<Measured> {
    let run = || -> Result<Vec<f64>> {
        let g = sym(32, 8.0)?;
        let f = gaussian(g, 1, 2.0)?;
        let s = AlphaSchedule::symmetric_range(8.0, 32)?;
        let xb = xbar_grid_for(&s, &g, &g, 2)?;
        let st = forward_p(&f, &s, &[xb])?;
        let mut out = dual_p(&st, &[g], &[g])?.values;
        out.extend(invert_general(&st, &ReconConfig::with_beta(0.5), &[g], &[g])?.values);
        let g2 = sym(8, 4.0)?;
        let f2 = gaussian(g2, 2, 1.0)?;
        let s2 = AlphaSchedule::uniform(-2.0, 3.0, 7)?;
        let xb2 = xbar_grid_for(&s2, &g2, &g2, 2)?;
        let st2 = forward_p(&f2, &s2, &[xb2, xb2])?;
        out.extend(&st2.values);
        out.extend(dual_p(&st2, &[g2, g2], &[g2, g2])?.values);
        Ok(out)
    };
    let a = run()?;
    let b = run()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    let c = pool.install(run)?;
    let same = a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let across = a.iter().zip(&c).map(|(x, y)| (x - y).abs()).fold(0.0_f64, f64::max) / scale;
    Ok(Measured {
        value: if same { 0.0 } else { f64::INFINITY },
        holds: across <= 1e-13,
        detail: Some(format!("largest relative change on one thread {across:.2e} (must be <= 1e-13)")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_selection_passes_vacuously() {
        let r = run_checks(&[], Level::Smoke, 0);
        assert!(r.checks.is_empty());
        assert!(r.overall_passed);
    }

    #[test]
    fn check_errors_are_recorded_not_raised() {
        let failing = Check {
            name: "always_fails",
            reference: "none",
            tolerance: 1.0,
            bound: Bound::AtMost,
            smoke: true,
            run: |_| Err(Error::Domain("boom".into())),
        };
        let panicking = Check {
            name: "panics",
            reference: "none",
            tolerance: 1.0,
            bound: Bound::AtMost,
            smoke: true,
            run: |_| panic!("bad check"),
        };
        let r = run_checks(&[&failing, &panicking], Level::Smoke, 0);
        assert_eq!(r.checks.len(), 2);
        assert!(!r.overall_passed);
        assert!(r.checks[0].detail.as_deref().unwrap().contains("boom"));
        assert!(r.checks[1].detail.as_deref().unwrap().contains("bad check"));
    }

    #[test]
    fn names_are_unique() {
        let mut names: Vec<&str> = REGISTRY.iter().map(|c| c.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), REGISTRY.len());
    }

    #[test]
    fn lower_bounds_and_side_conditions() {
        let c = Check {
            name: "x",
            reference: "",
            tolerance: 1.5,
            bound: Bound::AtLeast,
            smoke: true,
            run: |_| Ok(2.0.into()),
        };
        assert!(c.passes(&2.0.into()));
        assert!(!c.passes(&1.0.into()));
        assert!(!c.passes(&Measured {
            value: 2.0,
            holds: false,
            detail: None
        }));
        assert!(!c.passes(&f64::NAN.into()));
    }

    #[test]
    fn central_half_picks_middle_indices() {
        let g = Grid::new(4, 1.0, 0.0).unwrap();
        let truth = Field::from_fn(vec![g], vec![g], |_, _| 1.0).unwrap();
        // perturb only outside the middle half
        let mut v = truth.values.clone();
        v[0] = 5.0;
        v[15] = 5.0;
        let rec = truth.with_values(v).unwrap();
        assert_eq!(central_half_error(&rec, &truth), 0.0);
    }
}
