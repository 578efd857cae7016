//! Small dense complex linear algebra: 2×2 matrices for SL₂(ℂ) colorings and
//! generic solvers sized for segment-equation Jacobians (at most ~10×10).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::util::Cpx;

/// A 2×2 complex matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[Cpx; 2]; 2]);

impl Mat2 {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Mat2([[Cpx(a), Cpx(b)], [Cpx(c), Cpx(d)]])
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Mat2::new(one, zero, zero, one)
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.0[i][j].0
    }

    pub fn det(&self) -> Complex64 {
        self.at(0, 0) * self.at(1, 1) - self.at(0, 1) * self.at(1, 0)
    }

    pub fn mul(&self, other: &Mat2) -> Mat2 {
        let mut out = [[Cpx(Complex64::new(0.0, 0.0)); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = Cpx(self.at(i, 0) * other.at(0, j) + self.at(i, 1) * other.at(1, j));
            }
        }
        Mat2(out)
    }

    /// Inverse assuming det ≈ 1 is *not* assumed: divides by the determinant.
    pub fn inverse(&self) -> Mat2 {
        let d = self.det();
        Mat2::new(
            self.at(1, 1) / d,
            -self.at(0, 1) / d,
            -self.at(1, 0) / d,
            self.at(0, 0) / d,
        )
    }

    /// Row vector times matrix: v ↦ v·M.
    pub fn row_mul(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            v[0] * self.at(0, 0) + v[1] * self.at(1, 0),
            v[0] * self.at(0, 1) + v[1] * self.at(1, 1),
        ]
    }

    /// Matrix times column vector: u ↦ M·u.
    pub fn col_mul(&self, u: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.at(0, 0) * u[0] + self.at(0, 1) * u[1],
            self.at(1, 0) * u[0] + self.at(1, 1) * u[1],
        ]
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut m = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max((self.at(i, j) - other.at(i, j)).norm());
            }
        }
        m
    }
}

/// Normalized projective alignment of two row vectors:
/// |v1 ∧ v2| / (‖v1‖‖v2‖).  Zero iff the lines [v1], [v2] coincide.
pub fn projective_distance(v1: [Complex64; 2], v2: [Complex64; 2]) -> f64 {
    let wedge = v1[0] * v2[1] - v1[1] * v2[0];
    let n1 = (v1[0].norm_sqr() + v1[1].norm_sqr()).sqrt();
    let n2 = (v2[0].norm_sqr() + v2[1].norm_sqr()).sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return f64::INFINITY;
    }
    wedge.norm() / (n1 * n2)
}

/// Solve the square complex system A·x = b by Gaussian elimination with
/// partial pivoting.  Returns `None` when the pivot collapses.
pub fn solve_dense(a: &[Vec<Complex64>], b: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    let mut m: Vec<Vec<Complex64>> = a.to_vec();
    let mut rhs = b.to_vec();

    for col in 0..n {
        let (piv, piv_norm) = (col..n)
            .map(|r| (r, m[r][col].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if piv_norm < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                let sub = f * m[col][c];
                m[r][c] -= sub;
            }
            let sub = f * rhs[col];
            rhs[r] -= sub;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in row + 1..n {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Singular values of a rectangular complex matrix, descending.
///
/// Computed as square roots of the eigenvalues of AᴴA via cyclic Jacobi on
/// the Hermitian Gram matrix; accurate enough for the rank diagnostics this
/// crate needs (matrices of size ≤ ~10).
pub fn singular_values(a: &[Vec<Complex64>]) -> Vec<f64> {
    let rows = a.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = a[0].len();
    // Gram matrix G = AᴴA (cols × cols, Hermitian PSD).
    let mut g = vec![vec![Complex64::new(0.0, 0.0); cols]; cols];
    for i in 0..cols {
        for j in 0..cols {
            let mut s = Complex64::new(0.0, 0.0);
            for r in 0..rows {
                s += a[r][i].conj() * a[r][j];
            }
            g[i][j] = s;
        }
    }
    // Cyclic Jacobi for Hermitian matrices.
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                off = off.max(g[p][q].norm());
            }
        }
        if off < 1e-14 * (1.0 + frobenius(&g)) {
            break;
        }
        for p in 0..cols {
            for q in p + 1..cols {
                let gpq = g[p][q];
                if gpq.norm() == 0.0 {
                    continue;
                }
                let app = g[p][p].re;
                let aqq = g[q][q].re;
                // Unitary 2×2 diagonalization of [[app, gpq],[conj(gpq), aqq]].
                let phase = gpq / gpq.norm();
                let tau = (aqq - app) / (2.0 * gpq.norm());
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Columns rotate by [[c, -s·phase],[s·conj(phase)... applied
                // two-sided; update G = Jᴴ G J.
                for k in 0..cols {
                    let gkp = g[k][p];
                    let gkq = g[k][q];
                    g[k][p] = gkp * c - gkq * phase.conj() * s;
                    g[k][q] = gkp * phase * s + gkq * c;
                }
                for k in 0..cols {
                    let gpk = g[p][k];
                    let gqk = g[q][k];
                    g[p][k] = gpk * c - gqk * phase * s;
                    g[q][k] = gpk * phase.conj() * s + gqk * c;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..cols).map(|i| g[i][i].re.max(0.0).sqrt()).collect();
    vals.sort_by(|x, y| y.total_cmp(x));
    vals
}

fn frobenius(g: &[Vec<Complex64>]) -> f64 {
    g.iter()
        .flat_map(|row| row.iter())
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}
