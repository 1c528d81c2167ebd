use twoparty_core::kernel::{kernel_coeffs, kernel_moment};
use twoparty_core::schedule::{tetration_mse_bounds, Schedule};

/// `int u^j K(u) du` by integrating the piecewise-constant kernel over the
/// pieces `[k-1, k]` and `[-k, -(k-1)]`.
fn piecewise_moment(coeffs: &[f64], j: u32) -> f64 {
    let mut total = 0.0;
    for k in 1..=coeffs.len() {
        let height: f64 = coeffs[k - 1..].iter().sum();
        let (a, b) = ((k - 1) as f64, k as f64);
        let right = (b.powi(j as i32 + 1) - a.powi(j as i32 + 1)) / (j + 1) as f64;
        let left = if j % 2 == 0 { right } else { -right };
        total += height * (right + left);
    }
    total
}

#[test]
fn kernel_moments_by_piecewise_integration() {
    for l in 1..=6 {
        let k = kernel_coeffs(l).unwrap();
        assert!((piecewise_moment(k.coeffs(), 0) - 1.0).abs() < 1e-9, "l {l}");
        for j in 1..=l as u32 {
            assert!(piecewise_moment(k.coeffs(), j).abs() < 1e-9, "l {l} j {j}");
            assert!((kernel_moment(&k, j as usize) - piecewise_moment(k.coeffs(), j)).abs() < 1e-9);
        }
    }
    let k2 = kernel_coeffs(2).unwrap();
    assert!((k2.coeffs()[0] - 2.0 / 3.0).abs() <= 1e-12);
    assert!((k2.coeffs()[1] + 1.0 / 12.0).abs() <= 1e-12);
}

#[test]
fn tensor_kernel_mixed_moments() {
    let k = kernel_coeffs(4).unwrap().with_dimension(2).unwrap();
    let total: f64 =
        k.tensor_terms().iter().map(|t| t.weight * t.radii.iter().map(|&r| 2.0 * r as f64).product::<f64>()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    for a in 0..=4 {
        for b in 0..=4 - a {
            let want = if a == 0 && b == 0 { 1.0 } else { 0.0 };
            assert!((k.tensor_moment(&[a, b]) - want).abs() < 1e-9);
        }
    }
}

#[test]
fn tetration_rounds_stay_small() {
    let mut m = 10.5;
    while m <= 1e6 {
        let s = Schedule::tetration(m).unwrap();
        assert!(s.rounds() <= 6, "m {m}");
        assert!((s.odd_product() / (m / 10.0) - 1.0).abs() < 1e-12);
        assert!((s.even_product() / (m / 10.0) - 1.0).abs() < 1e-12);
        s.validate_for(m, m).unwrap();
        m *= 1.37;
    }
}

#[test]
fn tetration_bound_formulas() {
    let mut m = 10.5;
    while m <= 1e6 {
        let s = Schedule::tetration(m).unwrap();
        for (m1, m2) in [(m, m), (m, 3.0 * m)] {
            let b = s.predicted_bounds(m1, m2);
            assert!(b.comm_odd <= 6.0 / m1 && b.comm_even <= 6.0 / m2, "m {m}");
            assert!(b.info_odd >= m / (50.0 * m1 * m1 * m2) * (1.0 - 1e-12));
            // (1.1/m1) times the weighted sum; the sum itself is below 5.
            assert!(b.comm_odd * m1 / 1.1 < 5.0);
        }
        m *= 1.37;
    }
}

#[test]
fn schedule_examples() {
    let s = Schedule::tetration(100.0).unwrap();
    let e = std::f64::consts::E;
    let want = [e, e, 10.0 / e, 10.0 / e];
    for (a, w) in s.alphas().iter().zip(want) {
        assert!((a - w).abs() < 1e-12);
    }
    assert_eq!(Schedule::tetration(20.0).unwrap().alphas(), &[2.0, 2.0]);
    assert_eq!(Schedule::one_way(100.0).unwrap().alphas(), &[10.0]);
    assert!((Schedule::one_way(10.01).unwrap().alpha(1) - 1.001).abs() < 1e-12);
    assert!(Schedule::one_way(10.0).is_err());
    assert!(Schedule::tetration(9.0).is_err());
    let b = Schedule::new(vec![1.0, 1.0]).unwrap().predicted_bounds(50.0, 50.0);
    assert_eq!((b.comm_odd, b.comm_even), (0.0, 0.0));
    let (stated, derived) = tetration_mse_bounds(10_000, 40.0, 80.0, 0.5);
    assert!(stated > derived);
}
