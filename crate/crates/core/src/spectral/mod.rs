//! Continuous-normalised Fourier transforms, spectral filters, and the
//! Fourier-domain identities of the photography transform.

mod fft;
mod filter;

use std::f64::consts::PI;

use num_complex::Complex64;

pub use fft::{fft_axes, freq};
pub use filter::{apply_filter_bar, bandlimit_slices, apply_filter_field, apply_filter_stack, FilterKind, FilterSpec};

use crate::error::{Error, Result};
use crate::grid::{Field, FocalStack, Grid};
use crate::transforms::forward_slice;
use fft::for_each_index;

/// Samples of a continuous Fourier transform on the DFT frequency lattice of
/// `grids` (unshifted layout).
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub grids: Vec<Grid>,
    pub values: Vec<Complex64>,
}

impl Spectrum {
    pub fn shape(&self) -> Vec<usize> {
        self.grids.iter().map(|g| g.count).collect()
    }

    pub fn freq(&self, axis: usize, k: usize) -> f64 {
        let g = &self.grids[axis];
        freq(k, g.count, g.spacing)
    }

    /// Frequency-domain cell `prod(1 / (count * spacing))`.
    pub fn cell(&self) -> f64 {
        self.grids.iter().map(|g| 1.0 / (g.count as f64 * g.spacing)).product()
    }
}

/// Phase `exp(-2 pi i xi . origin)` times `prod(spacing)` at each bin.
fn continuum_factors(grids: &[Grid]) -> Vec<Complex64> {
    let shape: Vec<usize> = grids.iter().map(|g| g.count).collect();
    let cell: f64 = grids.iter().map(|g| g.spacing).product();
    let mut out = vec![Complex64::new(0.0, 0.0); shape.iter().product()];
    for_each_index(&shape, |lin, idx| {
        let phase: f64 = idx
            .iter()
            .zip(grids)
            .map(|(&k, g)| freq(k, g.count, g.spacing) * g.origin)
            .sum();
        out[lin] = Complex64::from_polar(cell, -2.0 * PI * phase);
    });
    out
}

/// Continuous FT approximation of real samples on `grids`.
pub fn fft_real(values: &[f64], grids: &[Grid]) -> Spectrum {
    let shape: Vec<usize> = grids.iter().map(|g| g.count).collect();
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let axes: Vec<usize> = (0..shape.len()).collect();
    fft_axes(&mut data, &shape, &axes, false);
    for (v, c) in data.iter_mut().zip(continuum_factors(grids)) {
        *v *= c;
    }
    Spectrum {
        grids: grids.to_vec(),
        values: data,
    }
}

/// Inverse of `fft_real`; the imaginary residue is dropped.
pub fn ifft_real(s: &Spectrum) -> Vec<f64> {
    let shape = s.shape();
    let mut data = s.values.clone();
    for (v, c) in data.iter_mut().zip(continuum_factors(&s.grids)) {
        *v /= c;
    }
    let axes: Vec<usize> = (0..shape.len()).collect();
    fft_axes(&mut data, &shape, &axes, true);
    data.iter().map(|v| v.re).collect()
}

pub fn fft_field(f: &Field) -> Spectrum {
    let grids: Vec<Grid> = f.x.iter().chain(f.u.iter()).copied().collect();
    fft_real(&f.values, &grids)
}

pub fn ifft_field(s: &Spectrum, n: usize) -> Result<Field> {
    if s.grids.len() != 2 * n {
        return Err(Error::Shape(format!("{} axes for an n={n} field", s.grids.len())));
    }
    let (x, u) = s.grids.split_at(n);
    Field::new(x.to_vec(), u.to_vec(), ifft_real(s))
}

/// Spectrum of slice `k` of a stack over its `xbar` axes.
pub fn fft_stack_slice(g: &FocalStack, k: usize) -> Spectrum {
    fft_real(g.slice(k), &g.xbar)
}

/// `sum |v|^2 * cell`, the quadrature L2 norm squared.
pub fn energy(values: &[f64], cell: f64) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>() * cell
}

pub fn spectral_energy(s: &Spectrum) -> f64 {
    s.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * s.cell()
}

/// Direct transform `sum f(x, u) exp(-2 pi i (xi_x x + xi_u u)) dx du` of an
/// `n = 1` field at one frequency.
fn dtft_plane(f: &Field, xi_x: f64, xi_u: f64) -> Complex64 {
    let (gx, gu) = (f.x[0], f.u[0]);
    let eu: Vec<Complex64> = (0..gu.count)
        .map(|j| Complex64::from_polar(1.0, -2.0 * PI * xi_u * gu.coord(j)))
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..gx.count {
        let row = &f.values[i * gu.count..(i + 1) * gu.count];
        let inner: Complex64 = row.iter().zip(&eu).map(|(v, e)| e * v).sum();
        acc += inner * Complex64::from_polar(1.0, -2.0 * PI * xi_x * gx.coord(i));
    }
    acc * gx.spacing * gu.spacing
}

/// Relative L2 mismatch between the spectrum of the slice `P_alpha f` and
/// the field spectrum on the line `(alpha xi, (1-alpha) xi)`, over
/// `|xi| <= nyquist / max(|alpha|, |1-alpha|, 1)`.
///
/// The slice is sampled with the field's `x` spacing on a symmetric grid of
/// `ceil(max(|alpha| + |1-alpha|, 1)) * count` points per axis; the field
/// side is evaluated as a direct sum at the exact off-lattice frequencies.
pub fn fourier_slice_check(f: &Field, alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        return Err(Error::Domain("alpha must be nonzero".into()));
    }
    let widen = (alpha.abs() + (1.0 - alpha).abs()).max(1.0).ceil() as usize;
    let xbar: Vec<Grid> = f
        .x
        .iter()
        .map(|g| Grid::symmetric(widen * g.count, g.spacing))
        .collect::<Result<_>>()?;
    let lhs = fft_real(&forward_slice(f, alpha, &xbar)?, &xbar);
    let nyq = 1.0 / (2.0 * f.x[0].spacing);
    let limit = nyq / alpha.abs().max((1.0 - alpha).abs()).max(1.0);
    let shape = lhs.shape();
    let mut sel: Vec<(usize, Vec<f64>)> = Vec::new();
    for_each_index(&shape, |lin, idx| {
        let xi: Vec<f64> = idx.iter().enumerate().map(|(a, &k)| lhs.freq(a, k)).collect();
        if xi.iter().map(|v| v * v).sum::<f64>().sqrt() <= limit {
            sel.push((lin, xi));
        }
    });
    let rhs: Vec<Complex64> = if f.n == 1 {
        sel.iter()
            .map(|(_, xi)| dtft_plane(f, alpha * xi[0], (1.0 - alpha) * xi[0]))
            .collect()
    } else {
        dtft_slice_4d(f, alpha, &lhs, &sel)
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for ((lin, _), r) in sel.iter().zip(&rhs) {
        num += (lhs.values[*lin] - r).norm_sqr();
        den += r.norm_sqr();
    }
    Ok((num / den).sqrt())
}

/// Field spectrum of an `n = 2` field on the slice, contracted one axis pair
/// at a time.
fn dtft_slice_4d(f: &Field, alpha: f64, lhs: &Spectrum, sel: &[(usize, Vec<f64>)]) -> Vec<Complex64> {
    let (x1, x2, u1, u2) = (f.x[0], f.x[1], f.u[0], f.u[1]);
    let m1 = lhs.grids[0].count;
    let m2 = lhs.grids[1].count;
    let fib = x2.count * u2.count;
    let phase = |xi: f64, g: &Grid, i: usize| Complex64::from_polar(1.0, -2.0 * PI * xi * g.coord(i));
    let mut need = vec![false; m1];
    for (lin, _) in sel {
        need[lin / m2] = true;
    }
    // t[k1][i2][j2] = sum over (x1, u1)
    let mut t = vec![Complex64::new(0.0, 0.0); m1 * fib];
    for k1 in 0..m1 {
        if !need[k1] {
            continue;
        }
        let xi = lhs.freq(0, k1);
        let ex: Vec<Complex64> = (0..x1.count).map(|i| phase(alpha * xi, &x1, i)).collect();
        let eu: Vec<Complex64> = (0..u1.count).map(|j| phase((1.0 - alpha) * xi, &u1, j)).collect();
        let row = &mut t[k1 * fib..(k1 + 1) * fib];
        for i1 in 0..x1.count {
            for i2 in 0..x2.count {
                for j1 in 0..u1.count {
                    let w = ex[i1] * eu[j1];
                    let base = ((i1 * x2.count + i2) * u1.count + j1) * u2.count;
                    for j2 in 0..u2.count {
                        row[i2 * u2.count + j2] += w * f.values[base + j2];
                    }
                }
            }
        }
    }
    sel.iter()
        .map(|(lin, xi)| {
            let k1 = lin / m2;
            let row = &t[k1 * fib..(k1 + 1) * fib];
            let mut acc = Complex64::new(0.0, 0.0);
            for i2 in 0..x2.count {
                let ex = phase(alpha * xi[1], &x2, i2);
                for j2 in 0..u2.count {
                    acc += row[i2 * u2.count + j2] * ex * phase((1.0 - alpha) * xi[1], &u2, j2);
                }
            }
            acc * x1.spacing * x2.spacing * u1.spacing * u2.spacing
        })
        .collect()
}

/// Linear convolution `(a * b)(z) = integral a(y) b(z - y) dy` of two arrays
/// sampled with equal spacings; the result lives on the grid whose origin is
/// the sum of the input origins and whose counts are `na + nb - 1`.
pub fn convolve_linear(a: &[f64], ga: &[Grid], b: &[f64], gb: &[Grid]) -> Result<(Vec<f64>, Vec<Grid>)> {
    if ga.len() != gb.len() {
        return Err(Error::Shape("convolution operands differ in rank".into()));
    }
    let mut out_grids = Vec::with_capacity(ga.len());
    for (x, y) in ga.iter().zip(gb) {
        if (x.spacing - y.spacing).abs() > 1e-12 * x.spacing {
            return Err(Error::Shape("convolution operands need equal spacings".into()));
        }
        out_grids.push(Grid::new(x.count + y.count - 1, x.spacing, x.origin + y.origin)?);
    }
    let sa: Vec<usize> = ga.iter().map(|g| g.count).collect();
    let sb: Vec<usize> = gb.iter().map(|g| g.count).collect();
    let so: Vec<usize> = out_grids.iter().map(|g| g.count).collect();
    let mut fa = fft::pad_real(a, &sa, &so);
    let mut fb = fft::pad_real(b, &sb, &so);
    let axes: Vec<usize> = (0..so.len()).collect();
    fft_axes(&mut fa, &so, &axes, false);
    fft_axes(&mut fb, &so, &axes, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    fft_axes(&mut fa, &so, &axes, true);
    let cell: f64 = ga.iter().map(|g| g.spacing).product();
    Ok((fa.iter().map(|v| v.re * cell).collect(), out_grids))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolution_of_boxes_is_a_triangle() {
        let g = [Grid::new(3, 1.0, 0.0).unwrap()];
        let (c, gc) = convolve_linear(&[1.0, 1.0, 1.0], &g, &[1.0, 1.0, 1.0], &g).unwrap();
        let expect = [1.0, 2.0, 3.0, 2.0, 1.0];
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(gc[0].count, 5);
        assert_eq!(gc[0].origin, 0.0);
    }

    #[test]
    fn dtft_plane_of_centred_gaussian() {
        let g = Grid::symmetric(64, 0.25).unwrap();
        let f = Field::from_fn(vec![g], vec![g], |x, u| (-PI * (x[0] * x[0] + u[0] * u[0])).exp()).unwrap();
        let v = dtft_plane(&f, 0.3, -0.2);
        let expect = (-PI * (0.09 + 0.04)).exp();
        assert!((v.re - expect).abs() < 1e-10 && v.im.abs() < 1e-10);
    }
}
