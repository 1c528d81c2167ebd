use proptest::prelude::*;
use twoparty_core::dpi::{
    binary_kl, chi2_sstar_bound, iproject, maximal_correlation, mutual_information, sstar1_grid, Joint2x2Law, PhiPsi,
};

/// Closed-form projection offset: the cross ratio of the projection equals
/// that of the law, which is a quadratic in `lambda`.
fn lambda_oracle(law: &Joint2x2Law, a: f64, b: f64) -> f64 {
    let p = law.matrix();
    let k = p[0][0] * p[1][1] / (p[0][1] * p[1][0]);
    let qa = 1.0 - k;
    let qb = a * b + (1.0 - a) * (1.0 - b) + k * (a * (1.0 - b) + (1.0 - a) * b);
    let qc = a * b * (1.0 - a) * (1.0 - b) * (1.0 - k);
    if qa.abs() < 1e-300 {
        return -qc / qb;
    }
    // The root with feasible cells is the one of smaller magnitude.
    let disc = (qb * qb - 4.0 * qa * qc).sqrt();
    let q = -0.5 * (qb + qb.signum() * disc);
    qc / q
}

fn test_laws() -> Vec<Joint2x2Law> {
    vec![
        Joint2x2Law::symmetric(0.02, 0.1).unwrap(),
        Joint2x2Law::symmetric(0.05, -0.5).unwrap(),
        Joint2x2Law::bernoulli(100.0, 0.5).unwrap(),
        Joint2x2Law::bernoulli(15.0, 0.9).unwrap(),
        Joint2x2Law::new([[0.1, 0.2], [0.3, 0.4]]).unwrap(),
        Joint2x2Law::new([[0.06, 0.14], [0.24, 0.56]]).unwrap(),
    ]
}

#[test]
fn sstar_grid_is_dominated_by_chi2_bound() {
    for m in [15.0, 1e2, 1e3, 1e4] {
        for delta in [0.1, 0.5, 0.9] {
            let law = Joint2x2Law::bernoulli(m, delta).unwrap();
            let bound = chi2_sstar_bound(m, delta).unwrap();
            let s = sstar1_grid(&law, 10_000).unwrap();
            assert!(s > 0.0 && s <= bound * (1.0 + 1e-6), "m {m} delta {delta}: {s} vs {bound}");
            let coarse = sstar1_grid(&law, 1000).unwrap();
            assert!((coarse - s).abs() < 0.01 * s, "m {m} delta {delta}: {coarse} vs {s}");
        }
    }
}

#[test]
fn sstar_is_at_least_maximal_correlation_squared_limit() {
    // Near Q_X = P_X the divergence ratio tends to rho_m^2, so the grid
    // supremum cannot fall far below it.
    let law = Joint2x2Law::bernoulli(100.0, 0.5).unwrap();
    let rho = maximal_correlation(&law);
    assert!(sstar1_grid(&law, 10_000).unwrap() >= 0.99 * rho * rho);
}

#[test]
fn maximal_correlation_of_family() {
    for m in [11.0, 15.0, 100.0, 1e4] {
        for delta in [-1.0, 0.1, 0.5, 0.9, 5.0] {
            if delta > m - 1.0 {
                continue;
            }
            let law = Joint2x2Law::bernoulli(m, delta).unwrap();
            let want = delta.abs() / (m - 1.0);
            assert!((maximal_correlation(&law) - want).abs() < 1e-10, "m {m} delta {delta}");
            assert!((law.singular_values()[0] - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn projections_converge_and_factorize() {
    let tol = 1e-10;
    for law in test_laws() {
        for (a, b) in [(0.03, 0.05), (0.5, 0.5), (0.9, 0.2), (0.01, 0.99)] {
            let r = iproject(&law, a, b, tol, 10_000).unwrap();
            assert!(r.converged && r.residual < tol, "{law:?} ({a}, {b}): {}", r.residual);
            assert!(r.factorization_residual(&law) < 10.0 * tol);
            let want = lambda_oracle(&law, a, b);
            assert!((r.lambda - want).abs() < 1e-9, "{} vs {want}", r.lambda);
            assert!(mutual_information(&r.matrix) >= -1e-15);
        }
    }
}

#[test]
fn product_projection_has_zero_information() {
    let law = Joint2x2Law::new([[0.06, 0.14], [0.24, 0.56]]).unwrap();
    let r = iproject(&law, 0.3, 0.8, 1e-14, 10_000).unwrap();
    assert!(mutual_information(&r.matrix).abs() < 1e-12);
}

#[test]
fn lambda_linearization() {
    let (p, delta, a, b) = (0.02, 0.1, 0.03, 0.05);
    let law = Joint2x2Law::symmetric(p, delta).unwrap();
    let r = iproject(&law, a, b, 1e-14, 10_000).unwrap();
    let ratio = r.lambda / (a * (1.0 - a) * b * (1.0 - b));
    let want = delta / ((1.0 - p) * (1.0 - p));
    assert!((ratio / want - 1.0).abs() < 0.1, "{ratio} vs {want}");
}

#[test]
fn phi_psi_envelope() {
    let mut ratios = Vec::new();
    for p in [0.01, 0.02, 0.05] {
        for delta in [0.05, 0.1] {
            let sup = PhiPsi::new(p, delta).unwrap().grid_sup(50).unwrap();
            let scaled = sup / (p * delta * delta);
            assert!(scaled <= 50.0, "p {p} delta {delta}: {scaled}");
            assert!(scaled > 0.0);
            ratios.push(scaled);
        }
    }
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max / min < 10.0);
}

proptest! {
    #[test]
    fn binary_kl_is_nonnegative(a in 1e-6f64..0.999999, p in 1e-6f64..0.999999) {
        let d = binary_kl(a, p);
        let naive = a * (a / p).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - p)).ln();
        prop_assert!(d >= 0.0);
        prop_assert!((d - naive).abs() <= 1e-12 * (1.0 + naive.abs()) + 1e-15);
    }

    #[test]
    fn chi2_bound_decreases_in_m(m in 1.01f64..1e5, delta in 0.01f64..2.0) {
        prop_assert!(chi2_sstar_bound(m * 1.1, delta).unwrap() < chi2_sstar_bound(m, delta).unwrap());
    }
}
