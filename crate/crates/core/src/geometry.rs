//! Shape parameters, segment equations, nonlinear solving for hyperbolic
//! structures, generalized critical points of the classical action, and
//! Chern-Simons / volume extraction.
//!
//! Conventions: at a crossing of sign ε labelled (1, 2, 1', 2') the corner
//! shape parameters are z_N = (b_2'/b_1)^ε, z_S = (b_2/b_1')^ε,
//! z_W = (b_2/(m·b_1))^ε, z_E = (m·b_2'/b_1')^ε, and the per-slot a-values
//! are a_1 = m^ε(1−z_W)/(1−z_N), a_2 = m^{−ε}(1−z_S)/(1−z_W),
//! a_1' = m^ε(1−z_S)/(1−z_E), a_2' = m^{−ε}(1−z_E)/(1−z_N).  Every segment
//! receives one a-value from the crossing it leaves and one from the crossing
//! it enters; the segment equations set their ratio to 1.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::action::{build_classical_action, ActionError};
use crate::diagram::{OpenDiagram, Role, SegRef};
use crate::linalg::{singular_values, solve_dense};
use crate::util::{Cpx, TAU_I};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("segment parameter b is zero at `{0}`")]
    ZeroB(String),
    #[error("degenerate shape parameter z = {z} at crossing `{crossing}` ({corner})")]
    Degenerate {
        crossing: String,
        corner: &'static str,
        z: Complex64,
    },
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("solver converged to a degenerate point (z ∈ {{0, 1}})")]
    DegenerateLimit,
    #[error("need at least one unpinned segment")]
    AllPinned,
    #[error(transparent)]
    Action(#[from] ActionError),
}

/// Corner shape parameters of one crossing, in the order [N, S, W, E].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossingShapes {
    pub z: [Cpx; 4],
}

pub const CORNER_NAMES: [&str; 4] = ["N", "S", "W", "E"];

/// Shape parameters of all octahedral tetrahedra of the diagram.
#[derive(Debug, Clone, Serialize)]
pub struct ShapeParameters {
    pub per_crossing: Vec<CrossingShapes>,
}

impl ShapeParameters {
    pub fn all_values(&self) -> Vec<Complex64> {
        self.per_crossing
            .iter()
            .flat_map(|c| c.z.iter().map(|z| z.0))
            .collect()
    }

    /// Crossings with a corner z within `tol` of {0, 1} (or non-finite).
    pub fn degenerate_corners(&self, tol: f64) -> Vec<(usize, &'static str, Complex64)> {
        let mut out = Vec::new();
        for (ci, c) in self.per_crossing.iter().enumerate() {
            for (k, z) in c.z.iter().enumerate() {
                let z = z.0;
                if !z.is_finite() || z.norm() < tol || (z - 1.0).norm() < tol {
                    out.push((ci, CORNER_NAMES[k], z));
                }
            }
        }
        out
    }
}

fn b_of(b: &[Complex64], b_boundary: Complex64, seg: SegRef) -> Complex64 {
    match seg {
        SegRef::Internal(i) => b[i],
        _ => b_boundary,
    }
}

/// Shape parameters from segment parameters b and meridian eigenvalue m.
pub fn shape_parameters(
    d: &OpenDiagram,
    b: &[Complex64],
    b_boundary: Complex64,
    m: Complex64,
) -> Result<ShapeParameters, GeometryError> {
    let mut per_crossing = Vec::with_capacity(d.crossings.len());
    for site in &d.crossings {
        let bb = |role: Role| b_of(b, b_boundary, site.slot(role));
        let (b1, b2, b1p, b2p) = (bb(Role::S1), bb(Role::S2), bb(Role::S1p), bb(Role::S2p));
        for (name, val) in [("s1", b1), ("s2", b2), ("s1p", b1p), ("s2p", b2p)] {
            if val.norm() == 0.0 || !val.is_finite() {
                return Err(GeometryError::ZeroB(format!("{}:{}", site.id, name)));
            }
        }
        let pow_eps = |z: Complex64| if site.sign > 0 { z } else { z.inv() };
        let z_n = pow_eps(b2p / b1);
        let z_s = pow_eps(b2 / b1p);
        let z_w = pow_eps(b2 / (m * b1));
        let z_e = pow_eps(m * b2p / b1p);
        per_crossing.push(CrossingShapes {
            z: [Cpx(z_n), Cpx(z_s), Cpx(z_w), Cpx(z_e)],
        });
    }
    Ok(ShapeParameters { per_crossing })
}

/// The four a-values of a crossing, indexed by role [a1, a2, a1', a2'].
fn crossing_a_values(
    shapes: &CrossingShapes,
    m: Complex64,
    eps: i8,
    crossing_id: &str,
    degeneracy_tol: f64,
) -> Result<[Complex64; 4], GeometryError> {
    let one = Complex64::new(1.0, 0.0);
    let [z_n, z_s, z_w, z_e] = [shapes.z[0].0, shapes.z[1].0, shapes.z[2].0, shapes.z[3].0];
    for (corner, z) in CORNER_NAMES.iter().zip([z_n, z_s, z_w, z_e]) {
        if (z - one).norm() < degeneracy_tol {
            return Err(GeometryError::Degenerate {
                crossing: crossing_id.to_string(),
                corner,
                z,
            });
        }
    }
    let m_eps = if eps > 0 { m } else { m.inv() };
    Ok([
        m_eps * (one - z_w) / (one - z_n),
        (one - z_s) / ((one - z_w) * m_eps),
        m_eps * (one - z_s) / (one - z_e),
        (one - z_e) / ((one - z_n) * m_eps),
    ])
}

/// Segment-equation residuals a_i/a_i' − 1, one per internal segment, where
/// a_i comes from the crossing the segment leaves and a_i' from the crossing
/// it enters.
pub fn segment_residuals(
    d: &OpenDiagram,
    b: &[Complex64],
    b_boundary: Complex64,
    m: Complex64,
) -> Result<Vec<Complex64>, GeometryError> {
    let shapes = shape_parameters(d, b, b_boundary, m)?;
    let mut a_vals = Vec::with_capacity(d.crossings.len());
    for (ci, site) in d.crossings.iter().enumerate() {
        a_vals.push(crossing_a_values(
            &shapes.per_crossing[ci],
            m,
            site.sign,
            &site.id,
            1e-14,
        )?);
    }
    let one = Complex64::new(1.0, 0.0);
    let mut res = Vec::with_capacity(d.num_internal());
    for i in 0..d.num_internal() {
        let (c_out, r_out) = d.output_slot(SegRef::Internal(i));
        let (c_in, r_in) = d.input_slot(SegRef::Internal(i));
        let a_out = a_vals[c_out][r_out as usize];
        let a_in = a_vals[c_in][r_in as usize];
        res.push(a_out / a_in - one);
    }
    Ok(res)
}

/// The same ratio for the closure's boundary segment (diagnostic; it is
/// gauge-redundant given the internal equations).
pub fn boundary_residual(
    d: &OpenDiagram,
    b: &[Complex64],
    b_boundary: Complex64,
    m: Complex64,
) -> Result<Complex64, GeometryError> {
    let shapes = shape_parameters(d, b, b_boundary, m)?;
    let (c_out, r_out) = d.output_slot(SegRef::BoundaryOut);
    let (c_in, r_in) = d.input_slot(SegRef::BoundaryIn);
    let a_out = crossing_a_values(
        &shapes.per_crossing[c_out],
        m,
        d.crossings[c_out].sign,
        &d.crossings[c_out].id,
        1e-14,
    )?[r_out as usize];
    let a_in = crossing_a_values(
        &shapes.per_crossing[c_in],
        m,
        d.crossings[c_in].sign,
        &d.crossings[c_in].id,
        1e-14,
    )?[r_in as usize];
    Ok(a_out / a_in - Complex64::new(1.0, 0.0))
}

/// Default gauge pins: the two inputs of the crossing the outgoing boundary
/// leaves, mirroring the normalization that fixes boundary data.
pub fn default_pins(d: &OpenDiagram) -> Vec<usize> {
    let (ci, _) = d.output_slot(SegRef::BoundaryOut);
    let site = &d.crossings[ci];
    let mut pins = Vec::new();
    for role in [Role::S1, Role::S2] {
        if let SegRef::Internal(i) = site.slot(role) {
            pins.push(i);
        }
    }
    pins.truncate(2);
    pins
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Segments held at their seed values (gauge fixing); defaults to
    /// [`default_pins`].
    pub pins: Option<Vec<usize>>,
    pub seed: u64,
    pub starts: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 60,
            pins: None,
            seed: 7,
            starts: 64,
        }
    }
}

/// A converged solution of the segment equations.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentSolution {
    pub b: Vec<Cpx>,
    pub residual: f64,
    pub iterations: usize,
    pub used_lm: bool,
    /// Rank deficiency of the unpinned full Jacobian at the solution.
    pub rank_deficiency: usize,
}

impl SegmentSolution {
    pub fn b_values(&self) -> Vec<Complex64> {
        self.b.iter().map(|c| c.0).collect()
    }
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Square residual selection: residuals of the unpinned segments, as a map
/// from the unpinned coordinates.
struct ReducedSystem<'a> {
    d: &'a OpenDiagram,
    m: Complex64,
    free: Vec<usize>,
}

impl<'a> ReducedSystem<'a> {
    fn new(d: &'a OpenDiagram, m: Complex64, pins: &[usize]) -> Result<Self, GeometryError> {
        let free: Vec<usize> = (0..d.num_internal()).filter(|i| !pins.contains(i)).collect();
        if free.is_empty() {
            return Err(GeometryError::AllPinned);
        }
        Ok(ReducedSystem { d, m, free })
    }

    fn full_residual(&self, b: &[Complex64]) -> Result<Vec<Complex64>, GeometryError> {
        segment_residuals(self.d, b, Complex64::new(1.0, 0.0), self.m)
    }

    fn reduced_residual(&self, b: &[Complex64]) -> Result<Vec<Complex64>, GeometryError> {
        let full = self.full_residual(b)?;
        Ok(self.free.iter().map(|&i| full[i]).collect())
    }

    fn jacobian(
        &self,
        b: &[Complex64],
        rows: &dyn Fn(&Self, &[Complex64]) -> Result<Vec<Complex64>, GeometryError>,
    ) -> Result<Vec<Vec<Complex64>>, GeometryError> {
        let base = rows(self, b)?;
        let n_rows = base.len();
        let mut jac = vec![vec![Complex64::new(0.0, 0.0); self.free.len()]; n_rows];
        for (col, &i) in self.free.iter().enumerate() {
            let h = 1e-7 * (1.0 + b[i].norm());
            let mut bp = b.to_vec();
            bp[i] += Complex64::new(h, 0.0);
            let mut bm = b.to_vec();
            bm[i] -= Complex64::new(h, 0.0);
            let rp = rows(self, &bp)?;
            let rm = rows(self, &bm)?;
            for r in 0..n_rows {
                jac[r][col] = (rp[r] - rm[r]) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

/// Damped Newton on the reduced square system with pinned coordinates held at
/// their seed values, falling back to Levenberg-Marquardt on the full system
/// when Newton stalls.  Residuals are measured on the full system.
pub fn solve_segment_equations(
    d: &OpenDiagram,
    m: Complex64,
    seed_b: &[Complex64],
    opts: &SolveOptions,
) -> Result<SegmentSolution, GeometryError> {
    let pins = opts.pins.clone().unwrap_or_else(|| default_pins(d));
    let sys = ReducedSystem::new(d, m, &pins)?;
    let mut b = seed_b.to_vec();
    let mut used_lm = false;
    let mut iterations = 0;

    let full_norm = |b: &[Complex64]| -> f64 {
        sys.full_residual(b).map(|r| max_norm(&r)).unwrap_or(f64::INFINITY)
    };

    // Seed already solves the system: return it unchanged.
    if full_norm(&b) < opts.tol {
        let rank_deficiency = rank_deficiency_at(&sys, &b)?;
        return Ok(SegmentSolution {
            b: b.iter().map(|z| Cpx(*z)).collect(),
            residual: full_norm(&b),
            iterations: 0,
            used_lm: false,
            rank_deficiency,
        });
    }

    // Newton phase.
    let mut stalled = false;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let r = match sys.reduced_residual(&b) {
            Ok(r) => r,
            Err(_) => {
                stalled = true;
                break;
            }
        };
        let jac = match sys.jacobian(&b, &|s, x| s.reduced_residual(x)) {
            Ok(j) => j,
            Err(_) => {
                stalled = true;
                break;
            }
        };
        let neg_r: Vec<Complex64> = r.iter().map(|z| -z).collect();
        let delta = match solve_dense(&jac, &neg_r) {
            Some(dlt) => dlt,
            None => {
                stalled = true;
                break;
            }
        };
        let current = full_norm(&b);
        let mut lambda = 1.0f64;
        let mut accepted = false;
        for _ in 0..8 {
            let mut cand = b.clone();
            for (col, &i) in sys.free.iter().enumerate() {
                cand[i] += delta[col] * lambda;
            }
            let cn = full_norm(&cand);
            if cn < current * (1.0 - 0.25 * lambda) || cn < opts.tol {
                b = cand;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            stalled = true;
            break;
        }
        if full_norm(&b) < opts.tol {
            break;
        }
    }

    // Levenberg-Marquardt fallback on the full system.
    if full_norm(&b) >= opts.tol && stalled {
        used_lm = true;
        b = seed_b.to_vec();
        let mut lambda = 1e-3;
        for _ in 0..opts.max_iter * 2 {
            iterations += 1;
            let r = match sys.full_residual(&b) {
                Ok(r) => r,
                Err(_) => break,
            };
            let jac = match sys.jacobian(&b, &|s, x| s.full_residual(x)) {
                Ok(j) => j,
                Err(_) => break,
            };
            let nf = sys.free.len();
            // Normal equations (JᴴJ + λI)δ = −JᴴF.
            let mut lhs = vec![vec![Complex64::new(0.0, 0.0); nf]; nf];
            let mut rhs = vec![Complex64::new(0.0, 0.0); nf];
            for p in 0..nf {
                for q in 0..nf {
                    let mut s = Complex64::new(0.0, 0.0);
                    for row in &jac {
                        s += row[p].conj() * row[q];
                    }
                    lhs[p][q] = s;
                }
                lhs[p][p] += Complex64::new(lambda, 0.0);
                let mut s = Complex64::new(0.0, 0.0);
                for (row, rr) in jac.iter().zip(&r) {
                    s += row[p].conj() * rr;
                }
                rhs[p] = -s;
            }
            let Some(delta) = solve_dense(&lhs, &rhs) else { break };
            let mut cand = b.clone();
            for (col, &i) in sys.free.iter().enumerate() {
                cand[i] += delta[col];
            }
            let current = full_norm(&b);
            let cn = full_norm(&cand);
            if cn < current {
                b = cand;
                lambda = (lambda / 3.0).max(1e-12);
                if cn < opts.tol {
                    break;
                }
            } else {
                lambda *= 5.0;
                if lambda > 1e8 {
                    break;
                }
            }
        }
    }

    let residual = full_norm(&b);
    if !(residual < opts.tol) {
        return Err(GeometryError::NoConvergence {
            iterations,
            residual,
        });
    }
    // Reject degenerate limits.
    let shapes = shape_parameters(d, &b, Complex64::new(1.0, 0.0), m)?;
    if !shapes.degenerate_corners(1e-7).is_empty() {
        return Err(GeometryError::DegenerateLimit);
    }
    let rank_deficiency = rank_deficiency_at(&sys, &b)?;
    Ok(SegmentSolution {
        b: b.iter().map(|z| Cpx(*z)).collect(),
        residual,
        iterations,
        used_lm,
        rank_deficiency,
    })
}

fn rank_deficiency_at(sys: &ReducedSystem, b: &[Complex64]) -> Result<usize, GeometryError> {
    // Full Jacobian with respect to all coordinates, pins included.
    let all = ReducedSystem {
        d: sys.d,
        m: sys.m,
        free: (0..sys.d.num_internal()).collect(),
    };
    let jac = all.jacobian(b, &|s, x| s.full_residual(x))?;
    let sv = singular_values(&jac);
    let top = sv.first().copied().unwrap_or(0.0).max(1e-300);
    Ok(sv.iter().filter(|s| **s < 1e-6 * top).count())
}

/// Multistart wrapper: seeded random starts near |b| ≈ 1 with random phases,
/// pins held at the values of the first draw, solutions deduplicated by
/// coordinate distance.
pub fn multistart_segment_solve(
    d: &OpenDiagram,
    m: Complex64,
    opts: &SolveOptions,
) -> Vec<SegmentSolution> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = d.num_internal();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
        (0..n)
            .map(|_| {
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let radius = (rng.gen_range(-0.35..0.35f64)).exp();
                Complex64::from_polar(radius, phase)
            })
            .collect()
    };
    let pin_template = draw(&mut rng);
    let pins = opts.pins.clone().unwrap_or_else(|| default_pins(d));
    let mut solutions: Vec<SegmentSolution> = Vec::new();
    for _ in 0..opts.starts {
        let mut seed_b = draw(&mut rng);
        for &p in &pins {
            seed_b[p] = pin_template[p];
        }
        let run_opts = SolveOptions {
            pins: Some(pins.clone()),
            ..opts.clone()
        };
        if let Ok(sol) = solve_segment_equations(d, m, &seed_b, &run_opts) {
            let bv = sol.b_values();
            let duplicate = solutions.iter().any(|s| {
                s.b_values()
                    .iter()
                    .zip(&bv)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0f64, f64::max)
                    < 1e-6
            });
            if !duplicate {
                solutions.push(sol);
            }
        }
    }
    solutions.sort_by(|x, y| {
        x.residual
            .total_cmp(&y.residual)
            .then_with(|| format!("{:?}", x.b).cmp(&format!("{:?}", y.b)))
    });
    solutions
}

// ---------------------------------------------------------------------------
// Critical points of the classical action
// ---------------------------------------------------------------------------

/// A generalized critical point of the classical action.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub gamma: Vec<Cpx>,
    /// Flattening vector k_i = (∂V/∂t_i)/(2πi), rounded.
    pub k: Vec<i64>,
    /// max_i |k_i − round(k_i)| before rounding.
    pub flattening_defect: f64,
    /// Critical value ς = V(γ).
    #[serde(with = "crate::util::cpx_serde")]
    pub sigma: Cpx2,
    /// max_i |exp(∂V/∂t_i) − 1|.
    pub residual: f64,
    pub iterations: usize,
    pub rank_deficiency: usize,
}

// serde helper: critical value stored plainly.
type Cpx2 = Complex64;

impl CriticalPoint {
    pub fn gamma_values(&self) -> Vec<Complex64> {
        self.gamma.iter().map(|c| c.0).collect()
    }

    /// ς adjusted by the flattening: V(γ) − 2πi k·γ.
    pub fn sigma_adjusted(&self) -> Complex64 {
        let mut s = self.sigma;
        for (k, g) in self.k.iter().zip(&self.gamma) {
            s -= TAU_I * (*k as f64) * g.0;
        }
        s
    }
}

/// Newton solve of exp(∂V/∂t_i) = 1 with pinned coordinates, returning the
/// critical point with its flattening vector and critical value.
pub fn find_critical_point(
    d: &OpenDiagram,
    seed_gamma: &[Complex64],
    opts: &SolveOptions,
) -> Result<CriticalPoint, GeometryError> {
    let action = build_classical_action(d);
    let pins = opts.pins.clone().unwrap_or_else(|| default_pins(d));
    let free: Vec<usize> = (0..d.num_internal()).filter(|i| !pins.contains(i)).collect();
    if free.is_empty() {
        return Err(GeometryError::AllPinned);
    }
    let one = Complex64::new(1.0, 0.0);

    let full_residual = |g: &[Complex64]| -> Result<Vec<Complex64>, GeometryError> {
        Ok(action
            .exp_grad_classical(g)?
            .into_iter()
            .map(|z| z - one)
            .collect())
    };
    let norm_of = |g: &[Complex64]| -> f64 {
        full_residual(g).map(|r| max_norm(&r)).unwrap_or(f64::INFINITY)
    };

    let mut gamma = seed_gamma.to_vec();
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        if norm_of(&gamma) < opts.tol {
            break;
        }
        iterations += 1;
        let r_full = full_residual(&gamma)?;
        let r: Vec<Complex64> = free.iter().map(|&i| r_full[i]).collect();
        // Numeric Jacobian of the reduced square system.
        let mut jac = vec![vec![Complex64::new(0.0, 0.0); free.len()]; free.len()];
        for (col, &i) in free.iter().enumerate() {
            let h = 1e-7;
            let mut gp = gamma.clone();
            gp[i] += Complex64::new(h, 0.0);
            let mut gm = gamma.clone();
            gm[i] -= Complex64::new(h, 0.0);
            let rp = full_residual(&gp)?;
            let rm = full_residual(&gm)?;
            for (row, &j) in free.iter().enumerate() {
                jac[row][col] = (rp[j] - rm[j]) / (2.0 * h);
            }
        }
        let neg_r: Vec<Complex64> = r.iter().map(|z| -z).collect();
        let Some(delta) = solve_dense(&jac, &neg_r) else {
            return Err(GeometryError::NoConvergence {
                iterations,
                residual: norm_of(&gamma),
            });
        };
        let current = norm_of(&gamma);
        let mut lambda = 1.0f64;
        let mut accepted = false;
        for _ in 0..10 {
            let mut cand = gamma.clone();
            for (col, &i) in free.iter().enumerate() {
                cand[i] += delta[col] * lambda;
            }
            let cn = norm_of(&cand);
            if cn < current * (1.0 - 0.25 * lambda) || cn < opts.tol {
                gamma = cand;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let residual = norm_of(&gamma);
    if !(residual < opts.tol) {
        return Err(GeometryError::NoConvergence {
            iterations,
            residual,
        });
    }

    // Reject the spurious critical manifold at infinity (all e^{2πiγ} → 0
    // makes exp_grad ≡ 1 identically) and anything whose value is not finite.
    if gamma.iter().any(|g| g.im.abs() > 6.0) {
        return Err(GeometryError::DegenerateLimit);
    }
    let grad = action.grad_classical(&gamma)?;
    let mut k = Vec::with_capacity(grad.len());
    let mut defect = 0.0f64;
    for gz in &grad {
        let raw = gz / TAU_I;
        let rounded = raw.re.round();
        defect = defect.max((raw.re - rounded).abs().max(raw.im.abs()));
        k.push(rounded as i64);
    }
    let sigma = action.eval_classical(&gamma, 1e-12)?;
    if !sigma.is_finite() || !(defect < 0.5) {
        return Err(GeometryError::DegenerateLimit);
    }

    // Rank of the unpinned Jacobian.
    let mut jac = vec![vec![Complex64::new(0.0, 0.0); d.num_internal()]; d.num_internal()];
    for col in 0..d.num_internal() {
        let h = 1e-7;
        let mut gp = gamma.clone();
        gp[col] += Complex64::new(h, 0.0);
        let mut gm = gamma.clone();
        gm[col] -= Complex64::new(h, 0.0);
        let rp = full_residual(&gp)?;
        let rm = full_residual(&gm)?;
        for row in 0..d.num_internal() {
            jac[row][col] = (rp[row] - rm[row]) / (2.0 * h);
        }
    }
    let sv = singular_values(&jac);
    let top = sv.first().copied().unwrap_or(0.0).max(1e-300);
    let rank_deficiency = sv.iter().filter(|s| **s < 1e-6 * top).count();

    Ok(CriticalPoint {
        gamma: gamma.iter().map(|z| Cpx(*z)).collect(),
        k,
        flattening_defect: defect,
        sigma,
        residual,
        iterations,
        rank_deficiency,
    })
}

/// Multistart search for critical points, deduplicated and sorted by
/// decreasing |Re ς|.
pub fn multistart_critical_points(d: &OpenDiagram, opts: &SolveOptions) -> Vec<CriticalPoint> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = d.num_internal();
    let pins = opts.pins.clone().unwrap_or_else(|| default_pins(d));
    let pin_template: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(0.05..0.95), rng.gen_range(-0.4..0.4)))
        .collect();

    // Seeds: the m = 1 segment solutions under γ = log b / 2πi (critical
    // points are exactly those solutions), with single-coordinate branch
    // shifts, then random draws.
    let mut seeds: Vec<Vec<Complex64>> = Vec::new();
    for sol in multistart_segment_solve(d, Complex64::new(1.0, 0.0), opts) {
        let base: Vec<Complex64> = sol.b_values().iter().map(|b| b.ln() / TAU_I).collect();
        seeds.push(base.clone());
        for i in 0..n {
            for shift in [-1.0, 1.0] {
                let mut s = base.clone();
                s[i] += Complex64::new(shift, 0.0);
                seeds.push(s);
            }
        }
    }
    for _ in 0..opts.starts {
        let mut seed: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(0.05..0.95), rng.gen_range(-0.4..0.4)))
            .collect();
        for &p in &pins {
            seed[p] = pin_template[p];
        }
        seeds.push(seed);
    }

    let mut found: Vec<CriticalPoint> = Vec::new();
    for seed in seeds {
        let run_opts = SolveOptions {
            pins: Some(pins.clone()),
            ..opts.clone()
        };
        if let Ok(cp) = find_critical_point(d, &seed, &run_opts) {
            let gv = cp.gamma_values();
            let dup = found.iter().any(|other| {
                other
                    .gamma_values()
                    .iter()
                    .zip(&gv)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0f64, f64::max)
                    < 1e-6
            });
            if !dup {
                found.push(cp);
            }
        }
    }
    found.sort_by(|x, y| {
        y.sigma
            .re
            .abs()
            .total_cmp(&x.sigma.re.abs())
            .then(x.residual.total_cmp(&y.residual))
    });
    found
}

/// Chern-Simons data extracted from a critical point.
#[derive(Debug, Clone, Serialize)]
pub struct ChernSimonsReport {
    #[serde(with = "crate::util::cpx_serde")]
    pub sigma: Complex64,
    /// |2π Re ς|: the hyperbolic volume for the geometric critical point.
    pub volume: f64,
    /// Sign of Re ς (both sign conventions are reported through it).
    pub volume_sign: f64,
    /// 2π Im ς mod 2π.
    pub cs_phase: f64,
    #[serde(with = "crate::util::cpx_serde")]
    pub sigma_adjusted: Complex64,
    /// 2π Im (ς − 2πi k·γ) mod 2π.
    pub cs_phase_adjusted: f64,
}

pub fn chern_simons(cp: &CriticalPoint) -> ChernSimonsReport {
    let tau = std::f64::consts::TAU;
    let phase = |s: Complex64| -> f64 {
        let p = (tau * s.im) % tau;
        if p < 0.0 {
            p + tau
        } else {
            p
        }
    };
    let adj = cp.sigma_adjusted();
    ChernSimonsReport {
        sigma: cp.sigma,
        volume: (tau * cp.sigma.re).abs(),
        volume_sign: cp.sigma.re.signum(),
        cs_phase: phase(cp.sigma),
        sigma_adjusted: adj,
        cs_phase_adjusted: phase(adj),
    }
}
