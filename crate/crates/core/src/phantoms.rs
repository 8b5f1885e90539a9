//! Deterministic synthetic light fields.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Minimum fraction of a Gaussian's analytic mass that must land on the grid.
pub const MASS_CONTAINMENT: f64 = 0.999;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhantomSpec {
    /// `exp(-pi |(x,u) - c|^2 / w^2)`
    Gaussian {
        #[serde(default)]
        center: Vec<f64>,
        width: f64,
    },
    /// Sum of `count` Gaussians with centres in `[-spread, spread]`, widths in
    /// `width_range` and amplitudes in `[0.5, 1]`, drawn from `seed`.
    GaussianMixture {
        count: usize,
        spread: f64,
        width_range: [f64; 2],
        #[serde(default)]
        seed: u64,
    },
    /// `prod_i L(x_i - s u_i) W(u_i)` with `L` a raised-cosine-squared bump of
    /// half-width `width` and `W` a cosine taper over the outer `u_taper`
    /// fraction of the `u` range (0 disables it).
    LambertianSlope {
        slope: f64,
        width: f64,
        #[serde(default = "default_taper")]
        u_taper: f64,
    },
    /// Sum of two single-slope fields with distinct slopes.
    TwoSlope {
        slopes: [f64; 2],
        width: f64,
        #[serde(default = "default_taper")]
        u_taper: f64,
    },
    /// Indicator of an axis-aligned box with the given half-widths.
    Box {
        half_widths: Vec<f64>,
        #[serde(default)]
        center: Vec<f64>,
    },
}

fn default_taper() -> f64 {
    1.0
}

/// Raised-cosine-squared bump `cos^4(pi t / (2 r))` on `|t| < r`.
pub fn bump(t: f64, r: f64) -> f64 {
    if t.abs() >= r {
        0.0
    } else {
        (PI * t / (2.0 * r)).cos().powi(4)
    }
}

/// Tukey-style taper over `[-half, half]`: 1 in the middle, cosine roll-off
/// over the outer `frac` of the half-range.
pub fn taper(u: f64, half: f64, frac: f64) -> f64 {
    if frac <= 0.0 {
        return 1.0;
    }
    let a = u.abs() / half;
    let flat = 1.0 - frac.min(1.0);
    if a <= flat {
        1.0
    } else if a <= 1.0 {
        0.5 * (1.0 + (PI * (a - flat) / frac.min(1.0)).cos())
    } else {
        0.0
    }
}

fn gaussian(x: &[f64], u: &[f64], c: &[f64], w: f64) -> f64 {
    let r2: f64 = x.iter().chain(u.iter()).zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
    (-PI * r2 / (w * w)).exp()
}

fn center_or_zero(c: &[f64], dims: usize) -> Result<Vec<f64>> {
    match c.len() {
        0 => Ok(vec![0.0; dims]),
        k if k == dims => Ok(c.to_vec()),
        k => Err(Error::Shape(format!("center has {k} coordinates, field has {dims} axes"))),
    }
}

fn check_mass(f: &Field, analytic: f64) -> Result<()> {
    let mass: f64 = f.values.iter().sum::<f64>() * f.cell();
    let frac = mass / analytic;
    if frac < MASS_CONTAINMENT {
        return Err(Error::Domain(format!(
            "only {:.5} of the phantom mass lies on the grid (need {MASS_CONTAINMENT})",
            frac
        )));
    }
    Ok(())
}

fn lambertian(x: &[f64], u: &[f64], s: f64, w: f64, half: &[f64], frac: f64) -> f64 {
    x.iter()
        .zip(u)
        .zip(half)
        .map(|((&xi, &ui), &h)| bump(xi - s * ui, w) * taper(ui, h, frac))
        .product()
}

/// Samples `spec` on `x` x `u` (one grid per axis, `n` each).
pub fn make_phantom(spec: &PhantomSpec, x: &[Grid], u: &[Grid]) -> Result<Field> {
    let n = x.len();
    let dims = 2 * n;
    let needs_symmetric = matches!(spec, PhantomSpec::Gaussian { .. } | PhantomSpec::GaussianMixture { .. });
    if needs_symmetric && !x.iter().chain(u.iter()).all(Grid::is_symmetric) {
        return Err(Error::Grid("gaussian phantoms need grids symmetric about zero".into()));
    }
    // half-range of u used by the taper: the grid edge plus half a cell
    let half: Vec<f64> = u.iter().map(|g| g.extent() / 2.0 + g.spacing / 2.0).collect();
    match spec {
        PhantomSpec::Gaussian { center, width } => {
            let c = center_or_zero(center, dims)?;
            let w = *width;
            if !(w > 0.0) {
                return Err(Error::Domain("gaussian width must be positive".into()));
            }
            let f = Field::from_fn(x.to_vec(), u.to_vec(), |xs, us| gaussian(xs, us, &c, w))?;
            check_mass(&f, w.powi(dims as i32))?;
            Ok(f)
        }
        PhantomSpec::GaussianMixture {
            count,
            spread,
            width_range,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let comps: Vec<(Vec<f64>, f64, f64)> = (0..*count)
                .map(|_| {
                    let c: Vec<f64> = (0..dims).map(|_| rng.gen_range(-spread..=*spread)).collect();
                    let w = rng.gen_range(width_range[0]..=width_range[1]);
                    let a = rng.gen_range(0.5..=1.0);
                    (c, w, a)
                })
                .collect();
            let f = Field::from_fn(x.to_vec(), u.to_vec(), |xs, us| {
                comps.iter().map(|(c, w, a)| a * gaussian(xs, us, c, *w)).sum()
            })?;
            let analytic: f64 = comps.iter().map(|(_, w, a)| a * w.powi(dims as i32)).sum();
            if analytic > 0.0 {
                check_mass(&f, analytic)?;
            }
            Ok(f)
        }
        PhantomSpec::LambertianSlope { slope, width, u_taper } => {
            Field::from_fn(x.to_vec(), u.to_vec(), |xs, us| lambertian(xs, us, *slope, *width, &half, *u_taper))
        }
        PhantomSpec::TwoSlope { slopes, width, u_taper } => {
            if slopes[0] == slopes[1] {
                return Err(Error::Domain("two_slope needs distinct slopes".into()));
            }
            Field::from_fn(x.to_vec(), u.to_vec(), |xs, us| {
                slopes
                    .iter()
                    .map(|&s| lambertian(xs, us, s, *width, &half, *u_taper))
                    .sum()
            })
        }
        PhantomSpec::Box { half_widths, center } => {
            if half_widths.len() != dims {
                return Err(Error::Shape(format!("box needs {dims} half-widths")));
            }
            let c = center_or_zero(center, dims)?;
            Field::from_fn(x.to_vec(), u.to_vec(), |xs, us| {
                let inside = xs
                    .iter()
                    .chain(us.iter())
                    .zip(&c)
                    .zip(half_widths)
                    .all(|((v, c), h)| (v - c).abs() <= *h);
                inside as u8 as f64
            })
        }
    }
}

/// In-focus refocus parameter of a slope-`s` Lambertian field.
pub fn focus_alpha(slope: f64) -> f64 {
    1.0 / (1.0 - slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taper_profile() {
        assert_eq!(taper(0.0, 1.0, 1.0), 1.0);
        assert!((taper(0.5, 1.0, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(taper(1.0, 1.0, 1.0), 0.0);
        assert_eq!(taper(0.3, 1.0, 0.5), 1.0);
        assert_eq!(taper(0.9, 1.0, 0.0), 1.0);
    }

    #[test]
    fn bump_is_compact() {
        assert_eq!(bump(0.0, 1.0), 1.0);
        assert_eq!(bump(1.0, 1.0), 0.0);
        assert!((bump(0.5, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn focus_of_half_slope() {
        assert_eq!(focus_alpha(0.5), 2.0);
    }
}
