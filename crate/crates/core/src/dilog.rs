//! Quantum and classical dilogarithms.
//!
//! * [`phi_b`] — Faddeev's noncompact quantum dilogarithm Φ_b(z), evaluated by
//!   trapezoid quadrature of its contour-integral representation on ℝ + iε.
//! * [`QDilogContext::pfl_exp`] — the level-N function e^{φ_N(t)} at b = √N,
//!   defined through Φ_{√N} and extended to the whole plane by its shift
//!   recurrence.  Only the exponential e^{φ_N} is ever produced; no logarithm
//!   of it is taken anywhere in this crate.
//! * [`li2`] — the principal-branch dilogarithm Li₂.
//! * [`dll`] — the branch-managed function ℓ on ℂ ∖ ((−∞,0] ∪ [1,∞)), the
//!   building block of the classical action.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

use crate::util::TAU_I;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DilogError {
    #[error("argument {0} lies on the branch cut [1, ∞)")]
    OnBranchCut(Complex64),
    #[error("argument {arg} is within {dist:.3e} of the singular lattice point {nearest}")]
    SingularityNear {
        arg: Complex64,
        nearest: Complex64,
        dist: f64,
    },
    #[error("argument {0} lies in the excluded set X = (−∞,0] ∪ [1,∞)")]
    InExcludedSet(Complex64),
    #[error("Φ_b argument {z} outside the strip |Im z| < {strip:.6} even after reduction")]
    OutsideStrip { z: Complex64, strip: f64 },
    #[error("level N must be at least 2, got {0}")]
    BadLevel(i64),
    #[error("quadrature self-check failed: relative deviation {0:.3e}")]
    QuadratureInconsistent(f64),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// ---------------------------------------------------------------------------
// Classical dilogarithm Li₂
// ---------------------------------------------------------------------------

/// Coefficients c_n with Li₂(z) = Σ_{n≥0} c_n u^{n+1}, u = −log(1−z).
///
/// c_0 = 1, c_1 = −1/4, c_{2k} = B_{2k}/(2k+1)! and c_odd = 0 for n ≥ 3.
/// The even coefficients are generated from ζ(2k) via
/// B_{2k} = (−1)^{k+1} 2 (2k)! ζ(2k) / (2π)^{2k}, which is numerically stable.
static LI2_U_COEFFS: Lazy<Vec<f64>> = Lazy::new(|| {
    let n_max = 130usize;
    let mut c = vec![0.0f64; n_max + 1];
    c[0] = 1.0;
    c[1] = -0.25;
    for k in 1..=(n_max / 2) {
        let two_k = 2 * k;
        let zeta = match two_k {
            2 => PI * PI / 6.0,
            4 => PI.powi(4) / 90.0,
            6 => PI.powi(6) / 945.0,
            _ => {
                // Converges in a handful of terms for 2k ≥ 8.
                let mut z = 1.0f64;
                let mut m = 2.0f64;
                loop {
                    let term = m.powi(-(two_k as i32));
                    if term < 1e-22 {
                        break;
                    }
                    z += term;
                    m += 1.0;
                }
                z
            }
        };
        // c_{2k} = B_{2k} / (2k+1)! = ±2 ζ(2k) / ((2π)^{2k} (2k+1))
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        c[two_k] = sign * 2.0 * zeta / (TAU.powi(two_k as i32) * (two_k as f64 + 1.0));
    }
    c
});

fn li2_series(z: Complex64) -> Complex64 {
    debug_assert!(z.norm() <= 0.75);
    let mut sum = ZERO;
    let mut zk = z;
    for k in 1..200u32 {
        let term = zk / ((k * k) as f64);
        sum += term;
        if term.norm() < 1e-18 * (1.0 + sum.norm()) {
            break;
        }
        zk *= z;
    }
    sum
}

fn li2_u_series(z: Complex64) -> Complex64 {
    let u = -(Complex64::new(1.0, 0.0) - z).ln();
    let coeffs = &*LI2_U_COEFFS;
    let mut sum = ZERO;
    let mut upow = u;
    for (n, &cn) in coeffs.iter().enumerate() {
        if cn != 0.0 {
            let term = upow * cn;
            sum += term;
            if n > 4 && term.norm() < 1e-18 * (1.0 + sum.norm()) {
                break;
            }
        }
        upow *= u;
    }
    sum
}

/// Principal-branch dilogarithm Li₂(z) = −∫₀ᶻ log(1−t)/t dt, z ∉ [1, ∞).
pub fn li2(z: Complex64) -> Result<Complex64, DilogError> {
    if z.im == 0.0 && z.re >= 1.0 {
        return Err(DilogError::OnBranchCut(z));
    }
    let r = z.norm();
    if r <= 0.5 {
        return Ok(li2_series(z));
    }
    if (Complex64::new(1.0, 0.0) - z).norm() <= 0.5 {
        // Reflection: Li₂(z) = π²/6 − log(z) log(1−z) − Li₂(1−z).
        let one = Complex64::new(1.0, 0.0);
        let w = one - z;
        let refl = c64(PI * PI / 6.0, 0.0) - z.ln() * w.ln() - li2_series(w);
        return Ok(refl);
    }
    if r >= 2.0 {
        // Inversion: Li₂(z) = −π²/6 − log²(−z)/2 − Li₂(1/z).
        let lm = (-z).ln();
        let inv = -c64(PI * PI / 6.0, 0.0) - lm * lm * 0.5 - li2(z.inv())?;
        return Ok(inv);
    }
    Ok(li2_u_series(z))
}

// ---------------------------------------------------------------------------
// The branch-managed function ℓ
// ---------------------------------------------------------------------------

/// Which defining branch of ℓ was used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum DllBranch {
    Upper,
    Lower,
}

/// A value of ℓ together with the branch that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchedValue {
    pub value: Complex64,
    pub branch: DllBranch,
}

/// Distance from ζ to the excluded set X = (−∞, 0] ∪ [1, ∞).
pub fn dist_to_excluded(zeta: Complex64) -> f64 {
    let y = zeta.im.abs();
    let x = zeta.re;
    if x <= 0.0 {
        y
    } else if x >= 1.0 {
        y
    } else {
        // Distance to the two ray endpoints.
        let d0 = (zeta.norm_sqr()).sqrt();
        let d1 = ((x - 1.0) * (x - 1.0) + y * y).sqrt();
        d0.min(d1)
    }
}

/// The holomorphic function ℓ on ℂ ∖ X.
///
/// Upper branch (Im ζ ≥ 0): Li₂(e^{2πiζ}) / 2πi.
/// Lower branch (Im ζ < 0): −Li₂(e^{−2πiζ}) / 2πi − πiζ(ζ−1) − πi/6.
/// On the segment (0,1) of the real axis the upper branch is used.
pub fn dll(zeta: Complex64) -> Result<BranchedValue, DilogError> {
    if zeta.im == 0.0 && (zeta.re <= 0.0 || zeta.re >= 1.0) {
        return Err(DilogError::InExcludedSet(zeta));
    }
    if zeta.im >= 0.0 {
        let w = (TAU_I * zeta).exp();
        let value = li2(w)? / TAU_I;
        Ok(BranchedValue {
            value,
            branch: DllBranch::Upper,
        })
    } else {
        let w = (-TAU_I * zeta).exp();
        let pi_i = c64(0.0, PI);
        let value = -li2(w)? / TAU_I - pi_i * zeta * (zeta - 1.0) - pi_i / 6.0;
        Ok(BranchedValue {
            value,
            branch: DllBranch::Lower,
        })
    }
}

/// Exact derivative dℓ/dζ, branch-consistent with [`dll`].
///
/// Satisfies exp(dℓ/dζ) = 1/(1 − e^{2πiζ}) on both branches; the un-exponentiated
/// value is what flattening vectors are made of.
pub fn dll_deriv(zeta: Complex64) -> Result<Complex64, DilogError> {
    if zeta.im == 0.0 && (zeta.re <= 0.0 || zeta.re >= 1.0) {
        return Err(DilogError::InExcludedSet(zeta));
    }
    let one = Complex64::new(1.0, 0.0);
    if zeta.im >= 0.0 {
        let w = (TAU_I * zeta).exp();
        Ok(-(one - w).ln())
    } else {
        let w = (-TAU_I * zeta).exp();
        Ok(-(one - w).ln() - TAU_I * zeta + c64(0.0, PI))
    }
}

// ---------------------------------------------------------------------------
// Faddeev's quantum dilogarithm
// ---------------------------------------------------------------------------

/// Quadrature settings for the contour integral defining Φ_b.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSettings {
    /// Offset of the contour ℝ + iε above the triple pole at w = 0.
    pub epsilon: f64,
    /// Decay budget: the integrand tail at |Re w| = W is below e^{−tail_log}.
    pub tail_log: f64,
    /// Exponential accuracy target for the trapezoid rule: error ~ e^{−acc_log}.
    pub acc_log: f64,
    /// Hard cap on the node count.
    pub max_nodes: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            epsilon: 0.25,
            tail_log: 41.0,
            acc_log: 45.0,
            max_nodes: 400_000,
        }
    }
}

/// Contour integral I(z) with Φ_b(z) = exp I(z), via trapezoid on ℝ + iε.
///
/// `grid_offset` shifts every node by that fraction of a step; two calls with
/// offsets 0 and 1/2 sample disjoint grids and give an independent check.
fn phi_b_integral(
    z: Complex64,
    b: f64,
    q: &QuadratureSettings,
    grid_offset: f64,
) -> Result<Complex64, DilogError> {
    let b_sum = b + 1.0 / b;
    let strip = 0.5 * b_sum;
    if z.im.abs() >= strip - 1e-9 {
        return Err(DilogError::OutsideStrip { z, strip });
    }
    let eps = q.epsilon.min(0.5 * PI / b.max(1.0 / b)).min(0.25 * strip);
    let decay = b_sum - 2.0 * z.im.abs();
    let w_max = (q.tail_log + 2.0 * eps * z.re.abs() + 5.0) / decay;
    // Analyticity half-width around the contour: limited by the pole at w = 0
    // and the first poles at ± iπ/max(b, 1/b).
    let delta = eps.min(PI / b.max(1.0 / b) - eps);
    let h = TAU * delta / q.acc_log;
    let n = ((2.0 * w_max / h).ceil() as usize).min(q.max_nodes);
    let h = 2.0 * w_max / n as f64;

    let mut acc = crate::util::NeumaierC::default();
    for j in 0..=n {
        let s = -w_max + (j as f64 + grid_offset) * h;
        let w = c64(s, eps);
        let denom = 4.0 * (w * b).sinh() * (w / b).sinh() * w;
        let val = (c64(0.0, -2.0) * z * w).exp() / denom;
        acc.add(val);
    }
    Ok(acc.value() * h)
}

/// Faddeev's noncompact quantum dilogarithm Φ_b(z) for |Im z| < |Im c_b|.
pub fn phi_b(z: Complex64, b: f64, q: &QuadratureSettings) -> Result<Complex64, DilogError> {
    Ok(phi_b_integral(z, b, q, 0.0)?.exp())
}

/// Φ_b on the complementary (midpoint-offset) grid, for self-consistency checks.
pub fn phi_b_alt_grid(z: Complex64, b: f64, q: &QuadratureSettings) -> Result<Complex64, DilogError> {
    Ok(phi_b_integral(z, b, q, 0.5)?.exp())
}

/// c_b = (i/2)(b + 1/b).
pub fn c_b(b: f64) -> Complex64 {
    c64(0.0, 0.5 * (b + 1.0 / b))
}

/// Evaluation context for the level-N quantum dilogarithm e^{φ_N} at b = √N.
#[derive(Debug, Clone)]
pub struct QDilogContext {
    pub level: i64,
    pub b: f64,
    pub quad: QuadratureSettings,
    /// Distance threshold below which a recurrence factor 1 − e^{2πis} counts
    /// as a singular hit.
    pub singularity_tol: f64,
}

impl QDilogContext {
    pub fn new(level: i64) -> Result<Self, DilogError> {
        if level < 2 {
            return Err(DilogError::BadLevel(level));
        }
        Ok(QDilogContext {
            level,
            b: (level as f64).sqrt(),
            quad: QuadratureSettings::default(),
            singularity_tol: 1e-8,
        })
    }

    pub fn n_f(&self) -> f64 {
        self.level as f64
    }

    /// The Φ argument corresponding to φ_N(t): i√N·t − c_√N + i/√N.
    fn phi_argument(&self, t: Complex64) -> Complex64 {
        c64(0.0, self.b) * t - c_b(self.b) + c64(0.0, 1.0 / self.b)
    }

    /// e^{φ_N(t)} for arbitrary t, reducing Re t into the mid-strip window
    /// (1/2 − 1/2N, 1/2 + 1/2N] with the recurrence
    /// e^{φ_N(t)} (1 − e^{2πit}) = e^{φ_N(t − 1/N)} before quadrature.
    pub fn pfl_exp(&self, t: Complex64) -> Result<Complex64, DilogError> {
        self.pfl_exp_grid(t, 0.0)
    }

    /// Same as [`Self::pfl_exp`] on the midpoint-offset quadrature grid.
    pub fn pfl_exp_alt_grid(&self, t: Complex64) -> Result<Complex64, DilogError> {
        self.pfl_exp_grid(t, 0.5)
    }

    fn pfl_exp_grid(&self, t: Complex64, grid_offset: f64) -> Result<Complex64, DilogError> {
        let n = self.n_f();
        let steps = ((t.re - 0.5) * n).round() as i64;
        let base = t - c64(steps as f64 / n, 0.0);
        let z = self.phi_argument(base);
        let mut value = phi_b_integral(z, self.b, &self.quad, grid_offset)?.exp();
        if steps >= 0 {
            // Walk upward: divide by (1 − e^{2πi(base + j/N)}) for j = 1..=steps.
            for j in 1..=steps {
                let s = base + c64(j as f64 / n, 0.0);
                value /= self.recurrence_factor(s)?;
            }
        } else {
            // Walk downward: multiply by (1 − e^{2πi(base − j/N)}) for j = 0..|steps|−1.
            for j in 0..(-steps) {
                let s = base - c64(j as f64 / n, 0.0);
                value *= self.recurrence_factor(s)?;
            }
        }
        Ok(value)
    }

    fn recurrence_factor(&self, s: Complex64) -> Result<Complex64, DilogError> {
        let f = Complex64::new(1.0, 0.0) - (TAU_I * s).exp();
        if f.norm() < self.singularity_tol {
            return Err(DilogError::SingularityNear {
                arg: s,
                nearest: c64(s.re.round(), 0.0),
                dist: f.norm(),
            });
        }
        Ok(f)
    }

    /// Values of e^{φ_N(c0 + d/N)} for d = lo..=hi, computed with a single
    /// quadrature and recurrence steps across the window.  This is the exact
    /// evaluation the state sum uses on its lattice.
    pub fn pfl_exp_lattice(
        &self,
        c0: Complex64,
        lo: i64,
        hi: i64,
    ) -> Result<Vec<Complex64>, DilogError> {
        assert!(lo <= hi);
        let n = self.n_f();
        let mut out = Vec::with_capacity((hi - lo + 1) as usize);
        let mut value = self.pfl_exp(c0 + c64(lo as f64 / n, 0.0))?;
        out.push(value);
        for d in (lo + 1)..=hi {
            let s = c0 + c64(d as f64 / n, 0.0);
            value /= self.recurrence_factor(s)?;
            out.push(value);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::NeumaierC;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Independent oracle: −∫₀ᶻ log(1−t)/t dt along the straight segment,
    /// composite Gauss-Legendre (20 panels × 16 nodes).
    fn li2_integral_oracle(z: Complex64) -> Complex64 {
        // 16-point Gauss-Legendre nodes/weights on [-1, 1].
        const X: [f64; 8] = [
            0.0950125098376374,
            0.2816035507792589,
            0.4580167776572274,
            0.6178762444026438,
            0.7554044083550030,
            0.8656312023878318,
            0.9445750230732326,
            0.9894009349916499,
        ];
        const W: [f64; 8] = [
            0.1894506104550685,
            0.1826034150449236,
            0.1691565193950025,
            0.1495959888165767,
            0.1246289712555339,
            0.0951585116824928,
            0.0622535239386479,
            0.0271524594117541,
        ];
        let panels = 24;
        let mut acc = NeumaierC::default();
        for p in 0..panels {
            let a = p as f64 / panels as f64;
            let b = (p + 1) as f64 / panels as f64;
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for k in 0..8 {
                for sgn in [-1.0, 1.0] {
                    let s = mid + sgn * half * X[k];
                    let t = z * s;
                    // Integrand −log(1−t)/t, with the removable singularity at 0.
                    let f = if t.norm() < 1e-12 {
                        Complex64::new(1.0, 0.0) + t / 2.0
                    } else {
                        -(Complex64::new(1.0, 0.0) - t).ln() / t
                    };
                    acc.add(f * z * half * W[k]);
                }
            }
        }
        acc.value()
    }

    #[test]
    fn li2_zero_is_zero() {
        assert_eq!(li2(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn li2_half_matches_integral_oracle() {
        let v = li2(c(0.5, 0.0)).unwrap();
        let o = li2_integral_oracle(c(0.5, 0.0));
        assert!((v - o).norm() < 1e-12, "{v} vs {o}");
    }

    #[test]
    fn li2_minus_one_matches_integral_oracle() {
        let v = li2(c(-1.0, 0.0)).unwrap();
        let o = li2_integral_oracle(c(-1.0, 0.0));
        assert!((v - o).norm() < 1e-12, "{v} vs {o}");
        // Also the closed form −π²/12.
        assert!((v.re + PI * PI / 12.0).abs() < 1e-13 && v.im.abs() < 1e-13);
    }

    #[test]
    fn li2_complex_points_match_integral_oracle() {
        // One point per dispatch branch: series, reflection, inversion, u-series.
        for z in [
            c(0.3, -0.2),
            c(0.9, 0.25),
            c(-1.7, 2.1),
            c(-1.1, 0.4),
            c(0.2, 1.1),
            c(1.4, 1.2),
        ] {
            let v = li2(z).unwrap();
            let o = li2_integral_oracle(z);
            assert!((v - o).norm() < 1e-11, "z={z}: {v} vs {o}");
        }
    }

    #[test]
    fn li2_rejects_branch_cut() {
        assert!(matches!(
            li2(c(1.5, 0.0)),
            Err(DilogError::OnBranchCut(_))
        ));
    }

    #[test]
    fn dll_vanishes_at_upper_infinity() {
        let v = dll(c(0.3, 40.0)).unwrap().value;
        assert!(v.norm() < 1e-30);
    }

    #[test]
    fn dll_branches_agree_near_real_axis() {
        for x in [0.25, 0.5, 0.75] {
            let up = dll(c(x, 1e-6)).unwrap();
            let dn = dll(c(x, -1e-6)).unwrap();
            assert_eq!(up.branch, DllBranch::Upper);
            assert_eq!(dn.branch, DllBranch::Lower);
            assert!(
                (up.value - dn.value).norm() < 1e-4,
                "x={x}: {} vs {}",
                up.value,
                dn.value
            );
        }
    }

    #[test]
    fn dll_rejects_excluded_set() {
        assert!(dll(c(-0.5, 0.0)).is_err());
        assert!(dll(c(1.5, 0.0)).is_err());
        assert!(dll(c(0.5, 0.0)).is_ok());
    }

    #[test]
    fn dll_derivative_identity_finite_differences() {
        // exp(dℓ/dζ)·(1 − e^{2πiζ}) = 1, with dℓ/dζ from central differences.
        let h = 1e-5;
        let pts = [
            c(0.3, 0.4),
            c(0.7, -0.6),
            c(0.1, 1.3),
            c(0.9, -0.2),
            c(0.5, 0.05),
            c(0.45, -1.1),
        ];
        for &z in &pts {
            let d_fd = (dll(z + c(h, 0.0)).unwrap().value - dll(z - c(h, 0.0)).unwrap().value)
                / (2.0 * h);
            let lhs = d_fd.exp() * (Complex64::new(1.0, 0.0) - (TAU_I * z).exp());
            assert!(
                (lhs - Complex64::new(1.0, 0.0)).norm() < 1e-6,
                "z={z}: {lhs}"
            );
        }
    }

    #[test]
    fn dll_deriv_matches_finite_differences_exactly() {
        let h = 1e-5;
        for &z in &[c(0.3, 0.4), c(0.6, -0.7)] {
            let d_fd = (dll(z + c(h, 0.0)).unwrap().value - dll(z - c(h, 0.0)).unwrap().value)
                / (2.0 * h);
            let d = dll_deriv(z).unwrap();
            assert!((d - d_fd).norm() < 1e-8, "z={z}: {d} vs {d_fd}");
        }
    }

    #[test]
    fn phi_b_symmetric_in_b_inverse() {
        let q = QuadratureSettings::default();
        for n in [2i64, 5] {
            let b = (n as f64).sqrt();
            for &z in &[c(0.1, 0.2), c(-0.4, -0.3), c(1.3, 0.0)] {
                let v1 = phi_b(z, b, &q).unwrap();
                let v2 = phi_b(z, 1.0 / b, &q).unwrap();
                assert!(
                    (v1 - v2).norm() / v1.norm() < 1e-10,
                    "N={n} z={z}: {v1} vs {v2}"
                );
            }
        }
    }

    #[test]
    fn phi_b_two_grid_consistency() {
        let q = QuadratureSettings::default();
        let b = 3.0f64.sqrt();
        for &z in &[c(0.3, 0.5), c(-0.8, -0.6), c(0.0, 0.0)] {
            let v1 = phi_b(z, b, &q).unwrap();
            let v2 = phi_b_alt_grid(z, b, &q).unwrap();
            assert!((v1 - v2).norm() / v1.norm() < 1e-10);
        }
    }

    #[test]
    fn pfl_recurrence_residual_on_grid() {
        // e^{φ_N(t)} (1 − e^{2πit}) = e^{φ_N(t − 1/N)} on a grid of complex t.
        for n in [2i64, 3, 5, 7] {
            let ctx = QDilogContext::new(n).unwrap();
            let mut worst = 0.0f64;
            for i in 0..10 {
                for j in 0..5 {
                    let t = c(
                        -0.9 + 0.35 * i as f64,
                        -0.45 + 0.22 * j as f64 + 0.07,
                    );
                    let lhs = ctx.pfl_exp(t).unwrap()
                        * (Complex64::new(1.0, 0.0) - (TAU_I * t).exp());
                    let rhs = ctx.pfl_exp(t - c(1.0 / n as f64, 0.0)).unwrap();
                    worst = worst.max((lhs - rhs).norm() / rhs.norm());
                }
            }
            assert!(worst < 1e-9, "N={n}: worst residual {worst:.3e}");
        }
    }

    #[test]
    fn pfl_unit_shift_law() {
        // e^{φ_N(t+1)}·(1 − e^{2πiNt}) = e^{φ_N(t)}, plus the product identity
        // ∏_j (1 − e^{2πi(t + j/N)}) = 1 − e^{2πiNt} checked directly.
        let n = 5i64;
        let ctx = QDilogContext::new(n).unwrap();
        for &t in &[c(0.23, 0.31), c(-0.4, -0.27), c(0.77, 0.11)] {
            let nf = n as f64;
            let mut prod = Complex64::new(1.0, 0.0);
            for j in 1..=n {
                prod *= Complex64::new(1.0, 0.0) - (TAU_I * (t + c(j as f64 / nf, 0.0))).exp();
            }
            let direct = Complex64::new(1.0, 0.0) - (TAU_I * t * nf).exp();
            assert!((prod - direct).norm() < 1e-12 * (1.0 + direct.norm()));

            let lhs = ctx.pfl_exp(t + c(1.0, 0.0)).unwrap() * direct;
            let rhs = ctx.pfl_exp(t).unwrap();
            assert!((lhs - rhs).norm() / rhs.norm() < 1e-9);
        }
    }

    #[test]
    fn pfl_lattice_table_consistent_with_direct_evaluation() {
        let ctx = QDilogContext::new(4).unwrap();
        let c0 = c(0.13, 0.21);
        let table = ctx.pfl_exp_lattice(c0, -5, 9).unwrap();
        for (idx, d) in (-5i64..=9).enumerate() {
            let direct = ctx.pfl_exp(c0 + c(d as f64 / 4.0, 0.0)).unwrap();
            let rel = (table[idx] - direct).norm() / direct.norm();
            assert!(rel < 1e-10, "d={d}: rel {rel:.3e}");
        }
    }

    #[test]
    fn pfl_singularity_is_reported() {
        let ctx = QDilogContext::new(3).unwrap();
        // t = 1 + 1/3 is a lattice point outside (0,1): walking the recurrence
        // there crosses a vanishing factor.
        let t = c(1.0 + 1.0 / 3.0, 0.0);
        match ctx.pfl_exp(t) {
            Err(DilogError::SingularityNear { .. }) => {}
            other => panic!("expected singularity report, got {other:?}"),
        }
    }

    #[test]
    fn pfl_scaling_approaches_classical_dilog() {
        // (1/N) φ_N(t) → ℓ(t + 1/2N): compare |e^{φ_N}|^{1/N} against
        // e^{Re ℓ} along Im t = 0.2.  The alternative convention ℓ/N² is
        // reported by the ratio test failing by orders of magnitude.
        let t = c(0.4, 0.2);
        let mut errs = Vec::new();
        for n in [8i64, 16, 32] {
            let ctx = QDilogContext::new(n).unwrap();
            let nf = n as f64;
            let val = ctx.pfl_exp(t).unwrap();
            let log_mag = val.norm().ln() / nf;
            let ell = dll(t + c(0.5 / nf, 0.0)).unwrap().value.re;
            errs.push((log_mag - ell).abs());
        }
        assert!(errs[2] < 1e-3, "N=32 deviation {}", errs[2]);
        assert!(errs[2] < errs[0], "profile should tighten with N: {errs:?}");
    }
}
