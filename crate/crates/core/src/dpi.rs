//! Data-processing constants of 2x2 laws: the chi-square bound on `s*`,
//! maximal correlation, a grid lower estimate of `s*`, I-projections onto
//! prescribed marginals, and the `phi / psi` ratio built from them.
//!
//! Logarithms are natural throughout.

use crate::error::{Error, Result};
use crate::family::{affine_joint, Matrix2};
use crate::math;

/// A general 2x2 joint law indexed `[x][y]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Joint2x2Law {
    p: Matrix2,
}

impl Joint2x2Law {
    /// Entries must be nonnegative, sum to 1 (within 1e-12) and give
    /// strictly positive marginals.
    pub fn new(p: Matrix2) -> Result<Self> {
        let mut total = 0.0;
        for row in &p {
            for &v in row {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Domain { name: "entry", value: v });
                }
                total += v;
            }
        }
        if math::abs(total - 1.0) > 1e-12 {
            return Err(Error::Domain { name: "total", value: total });
        }
        let law = Joint2x2Law { p };
        if law.px().iter().chain(law.py().iter()).any(|&m| m <= 0.0) {
            return Err(Error::DegenerateMarginal);
        }
        Ok(law)
    }

    /// The biased Bernoulli law with `m1 = m2 = m`.
    pub fn bernoulli(m: f64, delta: f64) -> Result<Self> {
        crate::family::BernoulliFamily::new(m, m, delta)?;
        Self::new(affine_joint(m, m).evaluate(delta))
    }

    /// `[[p^2 (1 + d), p q - p^2 d], [p q - p^2 d, q^2 + p^2 d]]`, `q = 1 - p`.
    pub fn symmetric(p: f64, delta: f64) -> Result<Self> {
        let q = 1.0 - p;
        let e = p * p * delta;
        Self::new([[p * p + e, p * q - e], [p * q - e, q * q + e]])
    }

    pub fn matrix(&self) -> Matrix2 {
        self.p
    }

    pub fn px(&self) -> [f64; 2] {
        [self.p[0][0] + self.p[0][1], self.p[1][0] + self.p[1][1]]
    }

    pub fn py(&self) -> [f64; 2] {
        [self.p[0][0] + self.p[1][0], self.p[0][1] + self.p[1][1]]
    }

    /// Singular values of `M(x, y) = P(x, y) / sqrt(P_X(x) P_Y(y))`,
    /// largest first.
    pub fn singular_values(&self) -> [f64; 2] {
        let (px, py) = (self.px(), self.py());
        let mut m = [[0.0; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                m[x][y] = self.p[x][y] / math::sqrt(px[x] * py[y]);
            }
        }
        let fro = m.iter().flatten().map(|v| v * v).sum::<f64>();
        let det = math::abs(m[0][0] * m[1][1] - m[0][1] * m[1][0]);
        let disc = math::sqrt((fro * fro - 4.0 * det * det).max(0.0));
        let s1 = math::sqrt(0.5 * (fro + disc));
        [s1, det / s1]
    }
}

/// `delta^2 / (m ln m - m + 1)`.
pub fn chi2_sstar_bound(m: f64, delta: f64) -> Result<f64> {
    if !(m > 1.0 && m.is_finite()) {
        return Err(Error::Domain { name: "m", value: m });
    }
    Ok(delta * delta / (m * math::ln(m) - m + 1.0))
}

/// Second singular value of the normalized joint matrix.
pub fn maximal_correlation(law: &Joint2x2Law) -> f64 {
    law.singular_values()[1]
}

/// `(1 + t) ln(1 + t) - t`, accurate for small `|t|`.
fn kl_term(t: f64) -> f64 {
    if math::abs(t) < 1e-3 {
        let t2 = t * t;
        t2 * (0.5 - t / 6.0 + t2 / 12.0 - t2 * t / 20.0 + t2 * t2 / 30.0)
    } else if t <= -1.0 {
        1.0
    } else {
        (1.0 + t) * math::ln_1p(t) - t
    }
}

/// `D([p0 + e, p1 - e] || [p0, p1])` without cancellation.
fn binary_kl_shift(p0: f64, p1: f64, e: f64) -> f64 {
    p0 * kl_term(e / p0) + p1 * kl_term(-e / p1)
}

/// Binary KL divergence `d(a || p)`.
pub fn binary_kl(a: f64, p: f64) -> f64 {
    binary_kl_shift(p, 1.0 - p, a - p)
}

/// Lower estimate of `s*(X; Y)`: the supremum of `D(Q_Y || P_Y) / D(Q_X || P_X)`
/// over `Q_X = [q, 1 - q]`, with `q` on a grid that is log-spaced towards
/// both ends of `(0, 1)`.
pub fn sstar1_grid(law: &Joint2x2Law, grid_size: usize) -> Result<f64> {
    if grid_size < 10 {
        return Err(Error::Domain { name: "grid_size", value: grid_size as f64 });
    }
    let px = law.px();
    let py = law.py();
    let p = law.matrix();
    // P(Y = 0 | X = 0) - P(Y = 0 | X = 1).
    let gain = p[0][0] / px[0] - p[1][0] / px[1];
    let half = grid_size / 2;
    let (lo, hi) = (math::ln(1e-9), math::ln(0.5));
    let mut best: f64 = 0.0;
    for i in 0..half {
        let s = math::exp(lo + (hi - lo) * i as f64 / (half - 1) as f64);
        for q in [s, 1.0 - s] {
            let dx_shift = q - px[0];
            let dx = binary_kl_shift(px[0], px[1], dx_shift);
            if !(dx > 0.0) {
                continue;
            }
            let dy = binary_kl_shift(py[0], py[1], dx_shift * gain);
            best = best.max(dy / dx);
        }
    }
    Ok(best)
}

/// An I-projection `P^{a,b}(x, y) = P(x, y) f(x) g(y)` onto marginals
/// `[a, 1 - a]` and `[b, 1 - b]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionResult {
    pub matrix: Matrix2,
    /// `P^{a,b}(0, 0) - a b`.
    pub lambda: f64,
    pub iterations: usize,
    /// Largest absolute marginal error.
    pub residual: f64,
    pub converged: bool,
    pub row_factors: [f64; 2],
    pub col_factors: [f64; 2],
}

impl ProjectionResult {
    /// `max |Q(x,y) - P(x,y) f(x) g(y)|` for the reported factors.
    pub fn factorization_residual(&self, law: &Joint2x2Law) -> f64 {
        let p = law.matrix();
        let mut worst: f64 = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                let want = p[x][y] * self.row_factors[x] * self.col_factors[y];
                worst = worst.max(math::abs(self.matrix[x][y] - want));
            }
        }
        worst
    }
}

/// Alternating row and column scaling until both marginal errors are below
/// `tol`, or `max_iter` sweeps.
pub fn iproject(law: &Joint2x2Law, alpha: f64, beta: f64, tol: f64, max_iter: usize) -> Result<ProjectionResult> {
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain { name, value: v });
        }
    }
    if !(tol > 0.0) {
        return Err(Error::Domain { name: "tol", value: tol });
    }
    let p = law.matrix();
    let rows = [alpha, 1.0 - alpha];
    let cols = [beta, 1.0 - beta];
    let mut f = [1.0; 2];
    let mut g = [1.0; 2];
    let q = |f: &[f64; 2], g: &[f64; 2]| {
        let mut out = [[0.0; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                out[x][y] = p[x][y] * f[x] * g[y];
            }
        }
        out
    };
    let residual_of = |m: &Matrix2| {
        let r0 = math::abs(m[0][0] + m[0][1] - rows[0]);
        let r1 = math::abs(m[1][0] + m[1][1] - rows[1]);
        let c0 = math::abs(m[0][0] + m[1][0] - cols[0]);
        let c1 = math::abs(m[0][1] + m[1][1] - cols[1]);
        r0.max(r1).max(c0).max(c1)
    };
    let mut iterations = 0;
    let mut m = q(&f, &g);
    let mut residual = residual_of(&m);
    while residual >= tol && iterations < max_iter {
        for x in 0..2 {
            let s = (p[x][0] * g[0] + p[x][1] * g[1]) * f[x];
            f[x] *= rows[x] / s;
        }
        for y in 0..2 {
            let s = (p[0][y] * f[0] + p[1][y] * f[1]) * g[y];
            g[y] *= cols[y] / s;
        }
        iterations += 1;
        m = q(&f, &g);
        residual = residual_of(&m);
    }
    Ok(ProjectionResult {
        matrix: m,
        lambda: m[0][0] - alpha * beta,
        iterations,
        residual,
        converged: residual < tol,
        row_factors: f,
        col_factors: g,
    })
}

/// Mutual information of a joint matrix (zero cells contribute 0).
pub fn mutual_information(m: &Matrix2) -> f64 {
    let px = [m[0][0] + m[0][1], m[1][0] + m[1][1]];
    let py = [m[0][0] + m[1][0], m[0][1] + m[1][1]];
    let mut total = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            if m[x][y] > 0.0 {
                total += m[x][y] * math::ln(m[x][y] / (px[x] * py[y]));
            }
        }
    }
    total
}

const PHI_TOL: f64 = 1e-15;
const PHI_MAX_ITER: usize = 100_000;

/// `phi / psi` at `(alpha, beta)` for the symmetric law with parameters
/// `(p, delta)`.
///
/// `I(a, b)` is the mutual information of the I-projection onto `(a, b)`,
/// `psi = d(alpha || p) + d(beta || p)` and
/// `phi = I(p, p) - I(alpha, beta) + I_a(p, p)(alpha - p) + I_b(p, p)(beta - p)`,
/// with the partial derivatives taken by central differences of step
/// `1e-5 p`.
pub fn phi_psi_ratio(p: f64, delta: f64, alpha: f64, beta: f64) -> Result<f64> {
    PhiPsi::new(p, delta)?.ratio(alpha, beta)
}

/// `phi / psi` with the expansion point quantities computed once.
#[derive(Clone, Copy, Debug)]
pub struct PhiPsi {
    law: Joint2x2Law,
    p: f64,
    i0: f64,
    grad: [f64; 2],
}

impl PhiPsi {
    pub fn new(p: f64, delta: f64) -> Result<Self> {
        let law = Joint2x2Law::symmetric(p, delta)?;
        let info = |a: f64, b: f64| -> Result<f64> {
            Ok(mutual_information(&iproject(&law, a, b, PHI_TOL, PHI_MAX_ITER)?.matrix))
        };
        let step = 1e-5 * p;
        let i0 = info(p, p)?;
        let ia = (info(p + step, p)? - info(p - step, p)?) / (2.0 * step);
        let ib = (info(p, p + step)? - info(p, p - step)?) / (2.0 * step);
        Ok(PhiPsi { law, p, i0, grad: [ia, ib] })
    }

    pub fn ratio(&self, alpha: f64, beta: f64) -> Result<f64> {
        let psi = binary_kl(alpha, self.p) + binary_kl(beta, self.p);
        if !(psi > 0.0) {
            return Err(Error::Domain { name: "psi", value: psi });
        }
        let iab = mutual_information(&iproject(&self.law, alpha, beta, PHI_TOL, PHI_MAX_ITER)?.matrix);
        let phi = self.i0 - iab + self.grad[0] * (alpha - self.p) + self.grad[1] * (beta - self.p);
        Ok(phi / psi)
    }

    /// Supremum of the ratio over a `points x points` grid, log-spaced in
    /// the open interval `(0.1 p, 10 p)` on each axis.
    pub fn grid_sup(&self, points: usize) -> Result<f64> {
        let (lo, hi) = (math::ln(0.1 * self.p), math::ln(10.0 * self.p));
        let axis = |i: usize| math::exp(lo + (hi - lo) * (i + 1) as f64 / (points + 1) as f64);
        let mut best = f64::NEG_INFINITY;
        for i in 0..points {
            for j in 0..points {
                let (a, b) = (axis(i), axis(j));
                if a == self.p && b == self.p {
                    continue;
                }
                best = best.max(self.ratio(a, b)?);
            }
        }
        Ok(best)
    }
}
