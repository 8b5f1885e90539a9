use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phototransform::spectral::{
    apply_filter_field, apply_filter_stack, convolve_linear, energy, fft_field, fft_real, fourier_slice_check,
    ifft_field, spectral_energy, FilterKind, FilterSpec,
};
use phototransform::verify::rel_l2;
use phototransform::{AlphaSchedule, Field, FocalStack, Grid};

fn sym(count: usize, extent: f64) -> Grid {
    Grid::symmetric(count, extent / count as f64).unwrap()
}

fn gaussian_plane(count: usize, extent: f64, width: f64) -> Field {
    let g = sym(count, extent);
    Field::from_fn(vec![g], vec![g], |x, u| (-PI * (x[0] * x[0] + u[0] * u[0]) / (width * width)).exp()).unwrap()
}

/// Sum of lattice cosines with both frequency indices nonzero and below a
/// quarter of the axis length: zero mean, no Nyquist content.
fn band_limited(rng: &mut ChaCha8Rng, grids: &[Grid]) -> Vec<f64> {
    let shape: Vec<usize> = grids.iter().map(|g| g.count).collect();
    let len: usize = shape.iter().product();
    let mut out = vec![0.0; len];
    for _ in 0..8 {
        let k: Vec<f64> = shape.iter().map(|&n| rng.gen_range(1..n / 4) as f64 / n as f64).collect();
        let amp = rng.gen_range(0.5..1.5);
        let phase = rng.gen_range(0.0..2.0 * PI);
        for (lin, v) in out.iter_mut().enumerate() {
            let mut rest = lin;
            let mut arg = phase;
            for a in (0..shape.len()).rev() {
                arg += 2.0 * PI * k[a] * (rest % shape[a]) as f64;
                rest /= shape[a];
            }
            *v += amp * arg.cos();
        }
    }
    out
}

fn random_band_limited_field(seed: u64, count: usize, n: usize) -> Field {
    let g = sym(count, count as f64 * 0.25);
    let grids = vec![g; 2 * n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::new(vec![g; n], vec![g; n], band_limited(&mut rng, &grids)).unwrap()
}

#[test]
fn gaussian_spectrum_matches_closed_form() {
    let f = gaussian_plane(128, 16.0, 1.0);
    let s = fft_field(&f);
    let mut worst: f64 = 0.0;
    for k1 in 0..128 {
        for k2 in 0..128 {
            let (a, b) = (s.freq(0, k1), s.freq(1, k2));
            let want = (-PI * (a * a + b * b)).exp();
            worst = worst.max((s.values[k1 * 128 + k2] - want).norm());
        }
    }
    assert!(worst <= 1e-6, "max deviation {worst}");
    let zero = fft_field(&f.with_values(vec![0.0; f.len()]).unwrap());
    assert!(zero.values.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn one_step_shift_multiplies_by_a_phase() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = sym(16, 8.0);
    let grids = [g, g];
    let v: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut shifted = vec![0.0; 256];
    for i in 0..16 {
        for j in 0..16 {
            shifted[((i + 1) % 16) * 16 + j] = v[i * 16 + j];
        }
    }
    let s = fft_real(&v, &grids);
    let t = fft_real(&shifted, &grids);
    for k1 in 0..16 {
        let phase = Complex64::from_polar(1.0, -2.0 * PI * g.spacing * s.freq(0, k1));
        for k2 in 0..16 {
            let idx = k1 * 16 + k2;
            assert!((t.values[idx] - s.values[idx] * phase).norm() <= 1e-12);
        }
    }
}

#[test]
fn inverse_transform_and_parseval() {
    let f = random_band_limited_field(2, 24, 1);
    let noisy = {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        f.with_values(f.values.iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect()).unwrap()
    };
    let s = fft_field(&noisy);
    let back = ifft_field(&s, 1).unwrap();
    assert!(rel_l2(&back.values, &noisy.values) <= 1e-13);
    let e = energy(&noisy.values, noisy.cell());
    assert!((spectral_energy(&s) - e).abs() <= 1e-10 * e);
}

#[test]
fn riesz_inverse_pair() {
    let f = random_band_limited_field(4, 32, 1);
    let up = apply_filter_field(&f, &FilterSpec::riesz(0.7)).unwrap();
    let back = apply_filter_field(&up, &FilterSpec::riesz(-0.7)).unwrap();
    assert!(rel_l2(&back.values, &f.values) <= 1e-10);

    let f2 = random_band_limited_field(5, 8, 2);
    let up = apply_filter_field(&f2, &FilterSpec::coupled_riesz(0.6)).unwrap();
    let back = apply_filter_field(&up, &FilterSpec::coupled_riesz(-0.6)).unwrap();
    assert!(rel_l2(&back.values, &f2.values) <= 1e-10);
}

#[test]
fn riesz_orders_compose() {
    let f = random_band_limited_field(6, 32, 1);
    for (b1, b2) in [(0.4, 0.9), (-0.5, 1.2), (1.1, -0.3)] {
        let two = apply_filter_field(&apply_filter_field(&f, &FilterSpec::riesz(b1)).unwrap(), &FilterSpec::riesz(b2)).unwrap();
        let one = apply_filter_field(&f, &FilterSpec::riesz(b1 + b2)).unwrap();
        assert!(rel_l2(&two.values, &one.values) <= 1e-10, "{b1} + {b2}");
    }
}

fn band_limited_stack(seed: u64) -> FocalStack {
    let xb = sym(64, 16.0);
    let s = AlphaSchedule::new(vec![-1.0, 0.5, 2.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..3).flat_map(|_| band_limited(&mut rng, &[xb])).collect();
    FocalStack::new(s, vec![xb], values).unwrap()
}

#[test]
fn hilbert_twice_is_minus_identity() {
    let g = band_limited_stack(7);
    let h = FilterSpec::new(FilterKind::Hilbert, 0.0);
    let hh = apply_filter_stack(&apply_filter_stack(&g, &h).unwrap(), &h).unwrap();
    let scale: f64 = g.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (a, b) in hh.values.iter().zip(&g.values) {
        assert!((a + b).abs() <= 1e-12 * scale);
    }
}

#[test]
fn stack_riesz_matches_hilbert_derivative() {
    // |xi| = (2 pi)^-1 (-i sgn xi)(2 pi i xi)
    let g = band_limited_stack(8);
    let r = apply_filter_stack(&g, &FilterSpec::riesz(-1.0)).unwrap();
    let d = apply_filter_stack(&g, &FilterSpec::new(FilterKind::Derivative, 0.0)).unwrap();
    let hd = apply_filter_stack(&d, &FilterSpec::new(FilterKind::Hilbert, 0.0)).unwrap();
    let hd: Vec<f64> = hd.values.iter().map(|v| v / (2.0 * PI)).collect();
    assert!(rel_l2(&hd, &r.values) <= 1e-12);
}

#[test]
fn laplacian_of_a_gaussian() {
    let f = gaussian_plane(128, 16.0, 1.0);
    let lap = apply_filter_field(&f, &FilterSpec::new(FilterKind::Laplacian, 0.0)).unwrap();
    let g = f.x[0];
    let mut want = Vec::with_capacity(f.len());
    for i in 0..g.count {
        for j in 0..g.count {
            let r2 = g.coord(i).powi(2) + g.coord(j).powi(2);
            want.push((4.0 * PI * PI * r2 - 4.0 * PI) * (-PI * r2).exp());
        }
    }
    assert!(rel_l2(&lap.values, &want) <= 1e-4);
}

#[test]
fn filter_validation() {
    let f = random_band_limited_field(9, 8, 1);
    assert!(apply_filter_field(&f, &FilterSpec::riesz(2.0)).is_err());
    assert!(apply_filter_field(&f, &FilterSpec::riesz(1.9)).is_ok());
    assert!(apply_filter_field(&f, &FilterSpec::coupled_riesz(2.0)).is_err());
    assert!(apply_filter_field(&f, &FilterSpec::new(FilterKind::BandlimitHb, 0.0)).is_err());
    assert!(apply_filter_field(&f, &FilterSpec::riesz(-1.0).with_cutoff(-1.0)).is_err());
    assert!(apply_filter_field(&f, &FilterSpec::riesz(f64::NAN)).is_err());
    let g = band_limited_stack(1);
    assert!(apply_filter_stack(&g, &FilterSpec::riesz(1.0)).is_err());
    assert!(apply_filter_stack(&g, &FilterSpec::coupled_riesz(0.5)).is_err());
}

#[test]
fn fourier_slice_on_gaussians() {
    let f = gaussian_plane(128, 8.0, 2.0);
    let e1 = fourier_slice_check(&f, 1.0).unwrap();
    assert!(e1 <= 1e-8, "alpha 1: {e1}");
    let e = fourier_slice_check(&f, 0.5).unwrap();
    assert!(e <= 1e-3, "alpha 0.5: {e}");
}

#[test]
fn linear_convolution_of_gaussians() {
    // widths add in quadrature and the masses multiply
    let g = sym(64, 16.0);
    let a: Vec<f64> = (0..64).map(|i| (-PI * g.coord(i).powi(2)).exp()).collect();
    let (c, gc) = convolve_linear(&a, &[g], &a, &[g]).unwrap();
    let want: Vec<f64> = (0..gc[0].count)
        .map(|i| (-PI * gc[0].coord(i).powi(2) / 2.0).exp() / 2f64.sqrt())
        .collect();
    assert!(rel_l2(&c, &want) <= 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn real_filters_are_linear(seed in any::<u64>(), beta in -1.5f64..1.5, a in -2.0f64..2.0) {
        let f = random_band_limited_field(seed, 16, 1);
        let h = random_band_limited_field(seed ^ 0xABCD, 16, 1);
        let spec = FilterSpec::riesz(beta);
        let combo = f.with_values(f.values.iter().zip(&h.values).map(|(x, y)| a * x + y).collect()).unwrap();
        let lhs = apply_filter_field(&combo, &spec).unwrap();
        let ff = apply_filter_field(&f, &spec).unwrap();
        let fh = apply_filter_field(&h, &spec).unwrap();
        let rhs: Vec<f64> = ff.values.iter().zip(&fh.values).map(|(x, y)| a * x + y).collect();
        prop_assert!(rel_l2(&lhs.values, &rhs) <= 1e-12);
    }
}
