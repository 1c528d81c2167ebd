//! Higher-order kernels built from nested interval indicators.
//!
//! `K(u) = sum_{k=1}^{k0} c_k 1[-k, k](u)` with `k0 = floor(l/2) + 1`. The
//! coefficients solve `int K = 1` and `int u^j K = 0` for even `1 <= j <= l`
//! (odd moments vanish by symmetry). In `d` dimensions the kernel is the
//! tensor product, which expands into `k0^d` weighted box indicators.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    l: usize,
    d: usize,
    coeffs: Vec<f64>,
}

/// One box of the tensorized kernel: half-widths (in bandwidth units) per
/// coordinate and the product coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTerm {
    pub radii: Vec<usize>,
    pub weight: f64,
}

impl KernelSpec {
    pub fn order(&self) -> usize {
        self.l
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn k0(&self) -> usize {
        self.coeffs.len()
    }

    /// `c_1, ..., c_{k0}`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn with_dimension(mut self, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain { name: "d", value: 0.0 });
        }
        self.d = d;
        Ok(self)
    }

    /// The one-dimensional kernel at `u`.
    pub fn evaluate(&self, u: f64) -> f64 {
        let a = math::abs(u);
        self.coeffs.iter().enumerate().filter(|(k, _)| a <= (k + 1) as f64).map(|(_, c)| c).sum()
    }

    /// The tensorized kernel at `u` (length `d`).
    pub fn evaluate_tensor(&self, u: &[f64]) -> f64 {
        u.iter().map(|&x| self.evaluate(x)).product()
    }

    /// `int u^(j_1) ... u^(j_d) K(u) du` over `R^d`.
    pub fn tensor_moment(&self, exponents: &[usize]) -> f64 {
        exponents.iter().map(|&j| kernel_moment(self, j)).product()
    }

    /// The `k0^d` boxes of the tensorized kernel, radii in lexicographic
    /// order.
    pub fn tensor_terms(&self) -> Vec<KernelTerm> {
        let k0 = self.k0();
        let total = k0.pow(self.d as u32);
        (0..total)
            .map(|mut idx| {
                let mut radii = alloc::vec![0; self.d];
                for r in radii.iter_mut().rev() {
                    *r = idx % k0 + 1;
                    idx /= k0;
                }
                let weight = radii.iter().map(|&k| self.coeffs[k - 1]).product();
                KernelTerm { radii, weight }
            })
            .collect()
    }
}

/// Kernel order used for smoothness `beta`: 1 up to `beta = 2`, otherwise
/// `floor(beta)`.
pub fn order_for_smoothness(beta: f64) -> usize {
    if beta <= 2.0 {
        1
    } else {
        math::floor(beta) as usize
    }
}

/// Solves for the order-`l` coefficients (one dimension).
pub fn kernel_coeffs(l: usize) -> Result<KernelSpec> {
    if l == 0 {
        return Err(Error::Domain { name: "l", value: 0.0 });
    }
    let k0 = l / 2 + 1;
    // Row t is the moment j = 2t: sum_k 2 k^(j+1) / (j+1) c_k = [j == 0].
    let mut a: Vec<Vec<f64>> = (0..k0)
        .map(|t| {
            let j = 2 * t;
            (1..=k0).map(|k| 2.0 * math::powi(k as f64, j as i32 + 1) / (j + 1) as f64).collect()
        })
        .collect();
    let mut b: Vec<f64> = (0..k0).map(|t| if t == 0 { 1.0 } else { 0.0 }).collect();
    let coeffs = solve(&mut a, &mut b).ok_or(Error::Domain { name: "l", value: l as f64 })?;
    Ok(KernelSpec { l, d: 1, coeffs })
}

/// `int u^j K(u) du` in one dimension.
pub fn kernel_moment(spec: &KernelSpec, j: usize) -> f64 {
    if j % 2 == 1 {
        return 0.0;
    }
    spec.coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| 2.0 * math::powi((i + 1) as f64, j as i32 + 1) * c / (j + 1) as f64)
        .sum()
}

/// Gaussian elimination with partial pivoting. `None` if singular.
fn solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| math::abs(a[i][col]).total_cmp(&math::abs(a[j][col])))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_orders() {
        let k1 = kernel_coeffs(1).unwrap();
        assert_eq!(k1.k0(), 1);
        assert!((k1.coeffs()[0] - 0.5).abs() < 1e-15);
        let k2 = kernel_coeffs(2).unwrap();
        assert!((k2.coeffs()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((k2.coeffs()[1] + 1.0 / 12.0).abs() < 1e-12);
        assert_eq!(kernel_coeffs(3).unwrap().coeffs(), k2.coeffs());
        assert_eq!(kernel_coeffs(4).unwrap().k0(), 3);
        assert!(kernel_coeffs(0).is_err());
    }

    #[test]
    fn moments() {
        for l in 1..=8 {
            let k = kernel_coeffs(l).unwrap();
            assert!((kernel_moment(&k, 0) - 1.0).abs() < 1e-9, "l {l}");
            for j in 1..=l {
                assert!(kernel_moment(&k, j).abs() < 1e-9, "l {l} j {j}");
            }
        }
    }

    #[test]
    fn evaluate_is_piecewise_constant() {
        let k = kernel_coeffs(2).unwrap();
        assert!((k.evaluate(0.5) - (2.0 / 3.0 - 1.0 / 12.0)).abs() < 1e-15);
        assert!((k.evaluate(-1.5) + 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(k.evaluate(2.5), 0.0);
    }

    #[test]
    fn tensor_terms_sum_to_kernel() {
        let k = kernel_coeffs(2).unwrap().with_dimension(2).unwrap();
        let terms = k.tensor_terms();
        assert_eq!(terms.len(), 4);
        assert_eq!(terms[1].radii, alloc::vec![1, 2]);
        let u = [0.3, -1.7];
        let direct = k.evaluate_tensor(&u);
        let via: f64 =
            terms.iter().filter(|t| t.radii.iter().zip(u).all(|(&r, x)| x.abs() <= r as f64)).map(|t| t.weight).sum();
        assert!((direct - via).abs() < 1e-15);
        assert!((k.tensor_moment(&[0, 0]) - 1.0).abs() < 1e-12);
        assert!(k.tensor_moment(&[2, 0]).abs() < 1e-12);
    }

    #[test]
    fn order_selection() {
        assert_eq!(order_for_smoothness(0.5), 1);
        assert_eq!(order_for_smoothness(2.0), 1);
        assert_eq!(order_for_smoothness(3.5), 3);
    }
}
