//! Runs the full verification suite and reports it grouped by the
//! properties the library promises. Slow: a few minutes in release mode.

use phototransform::verify::{run_suite, Level, VerifyReport};

const GROUPS: &[(&str, &[&str])] = &[
    ("adjoint exactness", &["adjoint_n1", "adjoint_n2"]),
    ("coupled Radon equivalence", &["coupled_radon_matches_forward"]),
    ("photography vs scaled Radon", &["photography_matches_scaled_radon"]),
    ("Fourier slice", &["fourier_slice_n1", "fourier_slice_n2"]),
    ("convolution theorem", &["convolution_theorem"]),
    ("dual convolution", &["dual_convolution"]),
    ("normal operator", &["normal_operator_n1"]),
    ("Riesz identities", &["riesz_inverse", "coupled_riesz_inverse"]),
    (
        "inversion round trips",
        &[
            "fbp_round_trip_n1",
            "bpf_round_trip_n1",
            "beta_spread_n1",
            "fbp_round_trip_lambertian",
            "bpf_round_trip_lambertian",
        ],
    ),
    ("form equivalences", &["hilbert_form_matches_fbp", "laplacian_form_matches_fbp"]),
    ("two slopes break the Lambertian inversion", &["two_slope_breaks_lambertian_inversion"]),
    ("two-parameter transform", &["pbar_separable", "pbar_round_trip"]),
    ("resolution convergence", &["resolution_convergence_n1"]),
];

fn full_run() -> VerifyReport {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    pool.install(|| run_suite(Level::Full, 7))
}

#[test]
fn full_suite_meets_every_criterion() {
    let first = full_run();
    let second = full_run();
    let mut failed = Vec::new();

    for (i, (label, names)) in GROUPS.iter().enumerate() {
        let mut ok = true;
        let mut parts = Vec::new();
        for name in *names {
            match first.check(name) {
                Some(c) => {
                    ok &= c.passed;
                    parts.push(format!("{name}={:.3e} (tol {})", c.measured_error, c.tolerance));
                }
                None => {
                    ok = false;
                    parts.push(format!("{name}=missing"));
                }
            }
        }
        println!("{} {:>2} {label}: {}", if ok { "PASS" } else { "FAIL" }, i + 1, parts.join(", "));
        if !ok {
            failed.push(i + 1);
        }
    }

    let a = serde_json::to_string(&first.without_timings()).unwrap();
    let b = serde_json::to_string(&second.without_timings()).unwrap();
    let repeat = first.check("repeat_runs_identical").is_some_and(|c| c.passed);
    let ok = a == b && repeat;
    println!(
        "{} 14 determinism: reports identical={}, repeat_runs_identical={}",
        if ok { "PASS" } else { "FAIL" },
        a == b,
        repeat
    );
    if !ok {
        failed.push(14);
    }

    for c in first.checks.iter().filter(|c| !c.passed) {
        if let Some(d) = &c.detail {
            println!("  {}: {d}", c.name);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
