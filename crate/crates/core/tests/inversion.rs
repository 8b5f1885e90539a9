use std::f64::consts::PI;

use phototransform::inversion::{
    invert, invert_bpf, invert_fbp, invert_general, invert_hilbert_form, invert_laplacian_form, invert_pbar, Method,
    ReconConfig,
};
use phototransform::transforms::{forward_p, forward_pbar, xbar_grid_for};
use phototransform::verify::rel_l2;
use phototransform::{AlphaSchedule, BarStack, Error, Field, FocalStack, Grid};

fn sym(count: usize, extent: f64) -> Grid {
    Grid::symmetric(count, extent / count as f64).unwrap()
}

fn gaussian(g: Grid, n: usize, width: f64) -> Field {
    Field::from_fn(vec![g; n], vec![g; n], |x, u| {
        let r2: f64 = x.iter().chain(u).map(|v| v * v).sum();
        (-PI * r2 / (width * width)).exp()
    })
    .unwrap()
}

struct Trip {
    field: Field,
    stack: FocalStack,
}

fn n1_trip() -> Trip {
    let g = sym(32, 8.0);
    let field = gaussian(g, 1, 2.0);
    let s = AlphaSchedule::symmetric_range(8.0, 64).unwrap();
    let xb = xbar_grid_for(&s, &g, &g, 2).unwrap();
    let stack = forward_p(&field, &s, &[xb]).unwrap();
    Trip { field, stack }
}

#[test]
fn n1_round_trips() {
    let t = n1_trip();
    let (x, u) = (&t.field.x, &t.field.u);
    for (name, rec, tol) in [
        ("general", invert_general(&t.stack, &ReconConfig::default(), x, u).unwrap(), 0.05),
        ("fbp", invert_fbp(&t.stack, &ReconConfig::default(), x, u).unwrap(), 0.05),
        ("hilbert", invert_hilbert_form(&t.stack, &ReconConfig::default(), x, u).unwrap(), 0.05),
        ("bpf", invert_bpf(&t.stack, &ReconConfig::with_beta(1.0), x, u).unwrap(), 0.06),
    ] {
        let err = rel_l2(&rec.values, &t.field.values);
        assert!(err <= tol, "{name}: {err}");
    }
}

#[test]
fn n1_forms_agree() {
    let t = n1_trip();
    let (x, u) = (&t.field.x, &t.field.u);
    let cfg = ReconConfig::default();
    let fbp = invert_fbp(&t.stack, &cfg, x, u).unwrap();
    let general = invert_general(&t.stack, &cfg, x, u).unwrap();
    assert!(rel_l2(&general.values, &fbp.values) <= 1e-10);
    let hilbert = invert_hilbert_form(&t.stack, &cfg, x, u).unwrap();
    assert!(rel_l2(&hilbert.values, &fbp.values) <= 1e-6);
    let bpf = invert_bpf(&t.stack, &ReconConfig::with_beta(1.0), x, u).unwrap();
    let general1 = invert_general(&t.stack, &ReconConfig::with_beta(1.0), x, u).unwrap();
    assert!(rel_l2(&general1.values, &bpf.values) <= 1e-10);
    let dispatched = invert(&t.stack, &ReconConfig::default().method(Method::HilbertForm), x, u).unwrap();
    assert_eq!(dispatched.values, hilbert.values);
}

#[test]
fn beta_only_changes_the_regularisation() {
    let t = n1_trip();
    let (x, u) = (&t.field.x, &t.field.u);
    let recs: Vec<Vec<f64>> = [0.0, 0.5, 1.0]
        .iter()
        .map(|&b| invert_general(&t.stack, &ReconConfig::with_beta(b), x, u).unwrap().values)
        .collect();
    for i in 0..3 {
        for j in i + 1..3 {
            let d = rel_l2(&recs[i], &recs[j]);
            assert!(d <= 0.02, "beta pair {i},{j}: {d}");
        }
    }
}

#[test]
fn zero_stacks_give_zero_fields() {
    let g = sym(16, 8.0);
    let s = AlphaSchedule::symmetric_range(4.0, 8).unwrap();
    let xb = xbar_grid_for(&s, &g, &g, 2).unwrap();
    let zero = FocalStack::zeros(s.clone(), vec![xb]).unwrap();
    for m in [Method::General, Method::Fbp, Method::Bpf, Method::HilbertForm] {
        let beta = if m == Method::Bpf { 1.0 } else { 0.0 };
        let r = invert(&zero, &ReconConfig::with_beta(beta).method(m), &[g], &[g]).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0), "{m:?}");
    }
    let g4 = sym(8, 4.0);
    let xb4 = xbar_grid_for(&s, &g4, &g4, 1).unwrap();
    let zero4 = FocalStack::zeros(s.clone(), vec![xb4, xb4]).unwrap();
    for m in [Method::General, Method::Fbp, Method::Bpf, Method::LaplacianForm] {
        let beta = if m == Method::Bpf { 1.0 } else { 0.0 };
        let r = invert(&zero4, &ReconConfig::with_beta(beta).method(m).lambertian(), &[g4, g4], &[g4, g4]).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0), "{m:?}");
    }
    let xbs = xbar_grid_for(&s, &g4, &g4, 1).unwrap();
    let bar = BarStack::new([s.clone(), s.clone()], [xbs, xbs], vec![0.0; s.len() * s.len() * xbs.count * xbs.count]).unwrap();
    let r = invert_pbar(&bar, &ReconConfig::default(), &[g4, g4], &[g4, g4]).unwrap();
    assert!(r.values.iter().all(|&v| v == 0.0));
}

#[test]
fn preconditions_are_enforced() {
    let g = sym(8, 4.0);
    let s = AlphaSchedule::symmetric_range(2.0, 3).unwrap();
    let xb = xbar_grid_for(&s, &g, &g, 1).unwrap();
    let st2 = FocalStack::zeros(s.clone(), vec![xb, xb]).unwrap();
    match invert_fbp(&st2, &ReconConfig::default(), &[g, g], &[g, g]) {
        Err(Error::Domain(msg)) => assert!(msg.contains("assume_lambertian"), "{msg}"),
        other => panic!("n=2 inversion ran without the Lambertian flag: {other:?}"),
    }
    let st1 = FocalStack::zeros(s, vec![xb]).unwrap();
    assert!(invert_general(&st1, &ReconConfig::with_beta(2.0), &[g], &[g]).is_err());
    assert!(invert_general(&st1, &ReconConfig::default(), &[g, g], &[g, g]).is_err());
    assert!(invert_hilbert_form(&st2, &ReconConfig::default().lambertian(), &[g, g], &[g, g]).is_err());
    assert!(invert_laplacian_form(&st1, &ReconConfig::default(), &[g], &[g]).is_err());
}

#[test]
fn laplacian_form_matches_fbp_in_two_dimensions() {
    let g = sym(12, 6.0);
    let field = Field::from_fn(vec![g; 2], vec![g; 2], |x, u| {
        let a = (x[0] - 0.5 * u[0]).powi(2) + (x[1] - 0.5 * u[1]).powi(2);
        (-PI * a).exp() * (-PI * (u[0] * u[0] + u[1] * u[1]) / 9.0).exp()
    })
    .unwrap();
    let s = AlphaSchedule::symmetric_range(4.0, 8).unwrap();
    let xb = xbar_grid_for(&s, &g, &g, 1).unwrap();
    let st = forward_p(&field, &s, &[xb, xb]).unwrap();
    let cfg = ReconConfig::default().lambertian();
    let a = invert_laplacian_form(&st, &cfg, &field.x, &field.u).unwrap();
    let b = invert_fbp(&st, &cfg, &field.x, &field.u).unwrap();
    assert!(rel_l2(&a.values, &b.values) <= 1e-6);
}

/// The two-parameter pipeline on a product field is the product of two
/// one-parameter pipelines.
#[test]
fn bar_inversion_of_a_product_is_the_product_of_line_inversions() {
    let g = sym(16, 6.0);
    let plane = gaussian(g, 1, 2.0);
    let field = gaussian(g, 2, 2.0);
    let s = AlphaSchedule::uniform(-4.0, 5.0, 17).unwrap();
    let xb = xbar_grid_for(&s, &g, &g, 1).unwrap();
    let cfg = ReconConfig::default();

    let bar = forward_pbar(&field, &[s.clone(), s.clone()], &[xb, xb]).unwrap();
    let r4 = invert_pbar(&bar, &cfg, &[g, g], &[g, g]).unwrap();
    let line = forward_p(&plane, &s, &[xb]).unwrap();
    let r2 = invert_general(&line, &cfg, &[g], &[g]).unwrap();

    let n = g.count;
    let mut product = vec![0.0; r4.len()];
    for i1 in 0..n {
        for i2 in 0..n {
            for j1 in 0..n {
                for j2 in 0..n {
                    product[((i1 * n + i2) * n + j1) * n + j2] = r2.values[i1 * n + j1] * r2.values[i2 * n + j2];
                }
            }
        }
    }
    let d = rel_l2(&r4.values, &product);
    assert!(d <= 0.02, "tensor mismatch {d}");
}
