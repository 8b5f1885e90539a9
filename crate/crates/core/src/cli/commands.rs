use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use phototransform::inversion;
use phototransform::io::{artifact_paths, emit_pgm, read_field, read_stack, write_field, write_stack};
use phototransform::phantoms::{make_phantom, PhantomSpec};
use phototransform::transforms::{classic_radon_2d, dual_p_weighted, forward_p, xbar_grid_for};
use phototransform::verify::{run_suite, Level};
use phototransform::{AlphaSchedule, Field, FocalStack, Grid};

use super::config::{ConfigError, Experiment};
use super::Failure;

pub struct Paths {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Paths {
    fn input<'a>(&'a self, fallback: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, Failure> {
        self.input
            .as_deref()
            .or(fallback.as_deref())
            .ok_or_else(|| ConfigError::new(key, "no input: pass --input or set it in the config").into())
    }

    fn output<'a>(&'a self, fallback: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, Failure> {
        self.out
            .as_deref()
            .or(fallback.as_deref())
            .ok_or_else(|| ConfigError::new(key, "no output: pass --out or set it in the config").into())
    }

    fn optional_output<'a>(&'a self, fallback: &'a Option<PathBuf>) -> Option<&'a Path> {
        self.out.as_deref().or(fallback.as_deref())
    }
}

fn sample_phantom(exp: &Experiment, seed: Option<u64>) -> Result<Field, Failure> {
    let mut spec = exp.phantom.clone();
    if let (PhantomSpec::GaussianMixture { seed: s, .. }, Some(v)) = (&mut spec, seed) {
        *s = v;
    }
    make_phantom(&spec, &exp.x, &exp.u).map_err(|e| ConfigError::new("phantom", e).into())
}

fn xbar_grids(exp: &Experiment, f: &Field) -> Result<Vec<Grid>, Failure> {
    Ok((0..f.n)
        .map(|i| xbar_grid_for(&exp.schedule, &f.x[i], &f.u[i], exp.xbar_refine))
        .collect::<phototransform::Result<_>>()?)
}

fn check_stack_fits(exp: &Experiment, g: &FocalStack) -> Result<(), Failure> {
    if g.n != exp.x.len() {
        return Err(ConfigError::new(
            "grids",
            format!("stack has n={} but the config describes n={} grids", g.n, exp.x.len()),
        )
        .into());
    }
    Ok(())
}

pub fn phantom(exp: &Experiment, io: &Paths, seed: Option<u64>) -> Result<(), Failure> {
    let out = io.output(&exp.outputs.field, "outputs.field")?;
    let f = sample_phantom(exp, seed)?;
    write_field(&f, out)?;
    Ok(())
}

pub fn forward(exp: &Experiment, io: &Paths) -> Result<(), Failure> {
    let input = io.input(&exp.outputs.field, "outputs.field")?;
    let out = io.output(&exp.outputs.stack, "outputs.stack")?;
    let f = read_field(input)?;
    let xbar = xbar_grids(exp, &f)?;
    let g = forward_p(&f, &exp.schedule, &xbar)?;
    write_stack(&g, out)?;
    Ok(())
}

pub fn adjoint(exp: &Experiment, io: &Paths) -> Result<(), Failure> {
    let input = io.input(&exp.outputs.stack, "outputs.stack")?;
    let out = io.output(&exp.outputs.adjoint, "outputs.adjoint")?;
    let g = read_stack(input)?;
    check_stack_fits(exp, &g)?;
    let f = dual_p_weighted(&g, exp.recon.beta, &exp.x, &exp.u)?;
    write_field(&f, out)?;
    Ok(())
}

pub fn invert(exp: &Experiment, io: &Paths) -> Result<(), Failure> {
    let input = io.input(&exp.outputs.stack, "outputs.stack")?;
    let out = io.output(&exp.outputs.reconstruction, "outputs.reconstruction")?;
    let g = read_stack(input)?;
    check_stack_fits(exp, &g)?;
    exp.check_invertible(g.n)?;
    let f = inversion::invert(&g, &exp.recon, &exp.x, &exp.u)?;
    write_field(&f, out)?;
    Ok(())
}

fn artifact_kind(path: &Path) -> Result<String, Failure> {
    let (_, json) = artifact_paths(path);
    let text = fs::read_to_string(&json).map_err(|e| Failure::Compute(format!("{}: {e}", json.display())))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Compute(format!("{}: malformed sidecar: {e}", json.display())))?;
    v.get("kind")
        .and_then(|k| k.as_str())
        .map(str::to_string)
        .ok_or_else(|| Failure::Compute(format!("{}: sidecar has no kind", json.display())))
}

fn pick(index: Option<usize>, len: usize, what: &str) -> Result<usize, Failure> {
    let k = index.unwrap_or(len / 2);
    if k >= len {
        return Err(Failure::Compute(format!("--index {k} is out of range for {len} {what}")));
    }
    Ok(k)
}

/// Row-major `(rows, cols, values)` image of a field or stack.
fn slice_image(path: &Path, index: Option<usize>) -> Result<(usize, usize, Vec<f64>), Failure> {
    match artifact_kind(path)?.as_str() {
        "field" => {
            let f = read_field(path)?;
            if f.n == 1 {
                return Ok((f.x[0].count, f.u[0].count, f.values));
            }
            // sub-aperture view: (x1, x2) at a fixed (u1, u2)
            let (nu1, nu2) = (f.u[0].count, f.u[1].count);
            let k = pick(index, nu1.min(nu2), "u samples")?;
            let (j1, j2) = if index.is_some() { (k, k) } else { (nu1 / 2, nu2 / 2) };
            let (rows, cols) = (f.x[0].count, f.x[1].count);
            let values = (0..rows * cols)
                .map(|p| f.values[(p * nu1 + j1) * nu2 + j2])
                .collect();
            Ok((rows, cols, values))
        }
        "stack" => {
            let g = read_stack(path)?;
            if g.n == 1 {
                return Ok((g.schedule.len(), g.xbar[0].count, g.values));
            }
            let k = pick(index, g.schedule.len(), "alphas")?;
            Ok((g.xbar[0].count, g.xbar[1].count, g.slice(k).to_vec()))
        }
        other => Err(Failure::Compute(format!("cannot slice a {other:?} artifact"))),
    }
}

pub fn slice(exp: &Experiment, io: &Paths, index: Option<usize>) -> Result<(), Failure> {
    let input = io.input(&exp.outputs.field, "outputs.field")?;
    let out = io.output(&exp.outputs.slice, "outputs.slice")?;
    let (rows, cols, values) = slice_image(input, index)?;
    emit_pgm(&values, rows, cols, out)?;
    Ok(())
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Compute(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Compute(format!("stdout: {e}"))),
    }
}

pub fn verify(exp: &Experiment, io: &Paths, level: Level, seed: u64) -> Result<(), Failure> {
    let report = run_suite(level, seed);
    for c in &report.checks {
        eprintln!(
            "{:<40} {:>11.3e} {} {:>9.1e}  {}",
            c.name,
            c.measured_error,
            if c.passed { "ok  " } else { "FAIL" },
            c.tolerance,
            c.detail.as_deref().unwrap_or("")
        );
    }
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Compute(e.to_string()))?;
    text.push('\n');
    write_text(io.optional_output(&exp.outputs.report), &text)?;
    if report.overall_passed {
        Ok(())
    } else {
        Err(Failure::Unmet)
    }
}

/// Alphas compared when the config gives no schedule of its own.
const RADON_ALPHAS: [f64; 3] = [-1.0, 0.5, 2.0];

pub fn radon_compare(exp: &Experiment, io: &Paths, seed: Option<u64>) -> Result<(), Failure> {
    if exp.x.len() != 1 {
        return Err(ConfigError::new("grids", "radon-compare needs an n=1 (x, u) grid pair").into());
    }
    let f = sample_phantom(exp, seed)?;
    let alphas: Vec<f64> = if exp.schedule_given {
        exp.schedule.alphas.clone()
    } else {
        RADON_ALPHAS.to_vec()
    };
    let mut csv = String::from("alpha,xbar,photography,scaled_radon,difference\n");
    for a in alphas {
        let s = AlphaSchedule::with_weights(vec![a], vec![1.0])?;
        let xb = xbar_grid_for(&s, &f.x[0], &f.u[0], exp.xbar_refine)?;
        let p = forward_p(&f, &s, &[xb])?;
        let rho = f64::hypot(a, 1.0 - a);
        let theta = [a / rho, (1.0 - a) / rho];
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..xb.count {
            let r = classic_radon_2d(&f, theta, xb.coord(i) / rho)? / rho;
            let d = p.values[i] - r;
            num += d * d;
            den += r * r;
            csv.push_str(&format!("{a},{},{:e},{r:e},{d:e}\n", xb.coord(i), p.values[i]));
        }
        eprintln!("alpha {a}: relative L2 difference {:.3e}", (num / den).sqrt());
    }
    write_text(io.optional_output(&exp.outputs.table), &csv)
}
