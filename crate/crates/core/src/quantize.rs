//! The state sum Z_N, the state integrals I_k, their Fourier-series relation,
//! and the diagnostic scans.
//!
//! The state sum is
//!   Z_N = N^{−(|E|+1)/2} Σ_{n ∈ [N]^E} exp(N 𝒜((β + n)/N)),
//! computed either by brute force over the lattice (cross-check mode) or by
//! contracting one rank-≤4 tensor per crossing along the diagram.  Every
//! dilogarithm factor depends on one lattice difference d = n_a − n_b, so
//! each term is evaluated once per d from a recurrence-stepped table.
//!
//! A state integral is
//!   I_k = ∫_{[0,1]^E} exp(N(𝒜(β/N + t) − 2πi k·t)) dt,
//! estimated with a randomized-shift rank-1 lattice rule (Korobov generator,
//! shift variance as the error estimate) or tensor Gauss-Legendre in low
//! dimension.  Partial sums of state integrals over symmetric boxes ‖k‖∞ ≤ K
//! use shared evaluation points: the box sum collapses into a product of 1-D
//! Dirichlet kernels, and its Fejér-weighted version into Fejér kernels.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

use crate::action::{build_quantum_action, ActionError, SymbolicAction};
use crate::coloring::ParameterSet;
use crate::diagram::OpenDiagram;
use crate::dilog::{DilogError, QDilogContext};
use crate::util::{frac, pairwise_sum, sum_error_bound, Cpx, NeumaierC, TAU_I};

#[derive(Debug, Error)]
pub enum QuantizeError {
    #[error(transparent)]
    Dilog(#[from] DilogError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("coloring is not normalized: boundary parameter {0}")]
    NotNormalized(Complex64),
    #[error("log-meridian inconsistent: |e^(2πiμ) − m| = {0:.3e}")]
    BadLogMeridian(f64),
    #[error("singular lattice term at crossing `{crossing}`, term {term}: {source}")]
    SingularLattice {
        crossing: String,
        term: usize,
        source: DilogError,
    },
    #[error("brute-force mode refused: {0} states exceed the limit")]
    BruteTooLarge(u128),
    #[error("tensor Gauss-Legendre supports at most 4 dimensions, diagram has {0}")]
    TooManyDims(usize),
    #[error("level must match the action (action N = {action}, requested {requested})")]
    LevelMismatch { action: i64, requested: i64 },
}

// ---------------------------------------------------------------------------
// Log-colorings
// ---------------------------------------------------------------------------

/// Logarithms β of the segment parameters, with the boundary fixed to 0,
/// and a log-meridian μ with e^{2πiμ} = m.
#[derive(Debug, Clone, Serialize)]
pub struct LogColoring {
    pub beta: Vec<Cpx>,
    #[serde(with = "crate::util::cpx_serde")]
    pub mu: Complex64,
    #[serde(with = "crate::util::cpx_serde")]
    pub m: Complex64,
}

impl LogColoring {
    /// Principal-branch log-coloring of a normalized parameter set.  `mu`
    /// overrides the principal log-meridian (it may differ by an integer).
    pub fn from_parameters(
        params: &ParameterSet,
        mu: Option<Complex64>,
    ) -> Result<Self, QuantizeError> {
        let b_bdry = params.b_boundary.0;
        if (b_bdry - Complex64::new(1.0, 0.0)).norm() > 1e-8 {
            return Err(QuantizeError::NotNormalized(b_bdry));
        }
        let m = params.m.0;
        let mu = mu.unwrap_or_else(|| m.ln() / TAU_I);
        let err = ((TAU_I * mu).exp() - m).norm();
        if err > 1e-10 {
            return Err(QuantizeError::BadLogMeridian(err));
        }
        Ok(LogColoring {
            beta: params.b.iter().map(|b| Cpx(b.0.ln() / TAU_I)).collect(),
            mu,
            m,
        })
    }

    pub fn beta_values(&self) -> Vec<Complex64> {
        self.beta.iter().map(|c| c.0).collect()
    }

    /// Largest |e^{2πiβ_i} − b_i| consistency defect.
    pub fn consistency_defect(&self, params: &ParameterSet) -> f64 {
        self.beta
            .iter()
            .zip(&params.b)
            .map(|(beta, b)| ((TAU_I * beta.0).exp() - b.0).norm())
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Lattice evaluation tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct LatticeTerm {
    /// prefactor·sign of the φ exponent.
    exp_sign: i8,
    pos: Option<usize>,
    neg: Option<usize>,
    d_lo: i64,
    values: Vec<Complex64>,
}

impl LatticeTerm {
    fn value(&self, n: &dyn Fn(usize) -> i64) -> Complex64 {
        let mut d = 0i64;
        if let Some(p) = self.pos {
            d += n(p);
        }
        if let Some(q) = self.neg {
            d -= n(q);
        }
        self.values[(d - self.d_lo) as usize]
    }
}

#[derive(Debug, Clone)]
struct LatticeBlock {
    /// Distinct internal variables of this crossing, in first-appearance order.
    vars: Vec<usize>,
    terms: Vec<LatticeTerm>,
    /// 2πi·prefactor·coeff per variable, evaluated.
    lin_coeffs: Vec<(usize, Complex64)>,
    /// 2πi·prefactor·(lin_const + Σ coeff·β_v/N), evaluated.
    lin_const: Complex64,
}

impl LatticeBlock {
    fn factor(&self, nf: f64, n: &dyn Fn(usize) -> i64) -> Complex64 {
        let mut product = Complex64::new(1.0, 0.0);
        for term in &self.terms {
            let v = term.value(n);
            if term.exp_sign > 0 {
                product *= v;
            } else {
                product /= v;
            }
        }
        let mut lin = self.lin_const;
        for (var, coeff) in &self.lin_coeffs {
            lin += coeff * (n(*var) as f64 / nf);
        }
        product * lin.exp()
    }
}

fn build_lattice_blocks(
    action: &SymbolicAction,
    ctx: &QDilogContext,
    beta: &[Complex64],
) -> Result<Vec<LatticeBlock>, QuantizeError> {
    let kind = &action.kind;
    let level = ctx.level;
    let nf = level as f64;
    action
        .blocks
        .iter()
        .map(|block| {
            let mut vars: Vec<usize> = Vec::new();
            for s in &block.slots {
                if let Some(v) = s.var {
                    if !vars.contains(&v) {
                        vars.push(v);
                    }
                }
            }
            let mut terms = Vec::with_capacity(4);
            for (ti, term) in block.dilogs.iter().enumerate() {
                let mut c0 = term.arg.cst.value(kind);
                if let Some(p) = term.arg.pos {
                    c0 += beta[p] / nf;
                }
                if let Some(q) = term.arg.neg {
                    c0 -= beta[q] / nf;
                }
                let (d_lo, d_hi) = match (term.arg.pos, term.arg.neg) {
                    (Some(_), Some(_)) => (-(level - 1), level - 1),
                    (Some(_), None) => (0, level - 1),
                    (None, Some(_)) => (-(level - 1), 0),
                    (None, None) => (0, 0),
                };
                let values = ctx.pfl_exp_lattice(c0, d_lo, d_hi).map_err(|e| {
                    QuantizeError::SingularLattice {
                        crossing: format!("c{}", block.crossing),
                        term: ti,
                        source: e,
                    }
                })?;
                terms.push(LatticeTerm {
                    exp_sign: block.prefactor * term.sign,
                    pos: term.arg.pos,
                    neg: term.arg.neg,
                    d_lo,
                    values,
                });
            }
            let pref = block.prefactor as f64;
            let mut lin_const = block.lin_const.value(kind);
            let mut lin_coeffs = Vec::new();
            for (var, coeff) in &block.lin_coeffs {
                let c = coeff.value(kind);
                lin_const += c * (beta[*var] / nf);
                lin_coeffs.push((*var, TAU_I * c * pref));
            }
            Ok(LatticeBlock {
                vars,
                terms,
                lin_coeffs,
                lin_const: TAU_I * lin_const * pref,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// State sums
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContractionStrategy {
    BruteForce,
    TensorNetwork,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSumResult {
    #[serde(with = "crate::util::cpx_serde")]
    pub value: Complex64,
    pub level: i64,
    pub term_count: u128,
    /// Rounding-error bound from the summation structure.
    pub error_bound: f64,
    pub strategy: ContractionStrategy,
}

/// Hard cap for the brute-force lattice enumeration.
pub const BRUTE_FORCE_LIMIT: u128 = 2_000_000;

/// Direct N^{|E|} summation (cross-check mode).
pub fn state_sum_brute(
    d: &OpenDiagram,
    lc: &LogColoring,
    level: i64,
) -> Result<StateSumResult, QuantizeError> {
    let action = build_quantum_action(d, lc.mu, level);
    let ctx = QDilogContext::new(level)?;
    let beta = lc.beta_values();
    let blocks = build_lattice_blocks(&action, &ctx, &beta)?;
    let e = d.num_internal();
    let states = (level as u128).pow(e as u32);
    if states > BRUTE_FORCE_LIMIT {
        return Err(QuantizeError::BruteTooLarge(states));
    }
    let nf = level as f64;
    let mut terms = Vec::with_capacity(states as usize);
    let mut n = vec![0i64; e];
    let mut abs_mass = 0.0f64;
    loop {
        let getter = |i: usize| n[i];
        let mut v = Complex64::new(1.0, 0.0);
        for b in &blocks {
            v *= b.factor(nf, &getter);
        }
        abs_mass += v.norm();
        terms.push(v);
        // Odometer increment.
        let mut carry = 0;
        while carry < e {
            n[carry] += 1;
            if n[carry] < level {
                break;
            }
            n[carry] = 0;
            carry += 1;
        }
        if carry == e {
            break;
        }
    }
    let prefactor = (level as f64).powf(-((e as f64) + 1.0) / 2.0);
    let value = pairwise_sum(&terms) * prefactor;
    Ok(StateSumResult {
        value,
        level,
        term_count: states,
        error_bound: sum_error_bound(abs_mass, terms.len()) * prefactor,
        strategy: ContractionStrategy::BruteForce,
    })
}

/// Tensor-network contraction: one dense rank-≤4 tensor per crossing,
/// contracted in diagram order with segments summed out as soon as both of
/// their end crossings have been absorbed.
pub fn state_sum(
    d: &OpenDiagram,
    lc: &LogColoring,
    level: i64,
) -> Result<StateSumResult, QuantizeError> {
    let action = build_quantum_action(d, lc.mu, level);
    state_sum_with_action(d, &action, lc, level)
}

pub fn state_sum_with_action(
    d: &OpenDiagram,
    action: &SymbolicAction,
    lc: &LogColoring,
    level: i64,
) -> Result<StateSumResult, QuantizeError> {
    if action.level() != Some(level) {
        return Err(QuantizeError::LevelMismatch {
            action: action.level().unwrap_or(-1),
            requested: level,
        });
    }
    let ctx = QDilogContext::new(level)?;
    let beta = lc.beta_values();
    let blocks = build_lattice_blocks(action, &ctx, &beta)?;
    let e = d.num_internal();
    let nf = level as f64;
    let n_usize = level as usize;

    // How many blocks touch each variable (2, or 1 when a segment has both
    // ends on the same crossing).
    let mut occurrences = vec![0usize; e];
    for b in &blocks {
        for &v in &b.vars {
            occurrences[v] += 1;
        }
    }

    // Dense per-block tensors, normalized to unit peak with the scale
    // tracked in log space.
    let mut log_scale = 0.0f64;
    let mut tensors: Vec<(Vec<usize>, Vec<Complex64>)> = Vec::with_capacity(blocks.len());
    for b in &blocks {
        let dims = b.vars.len();
        let size = n_usize.pow(dims as u32);
        let mut data = Vec::with_capacity(size);
        let mut idx = vec![0i64; dims];
        for _ in 0..size {
            let getter = |i: usize| {
                let pos = b.vars.iter().position(|&v| v == i).expect("var of block");
                idx[pos]
            };
            data.push(b.factor(nf, &getter));
            let mut carry = 0;
            while carry < dims {
                idx[carry] += 1;
                if idx[carry] < level {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
        }
        let peak = data.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        if peak > 0.0 {
            for z in &mut data {
                *z /= peak;
            }
            log_scale += peak.ln();
        }
        tensors.push((b.vars.clone(), data));
    }

    // Sequential contraction.
    let mut open: Vec<usize> = Vec::new();
    let mut frontier: Vec<Complex64> = vec![Complex64::new(1.0, 0.0)];
    let mut seen = vec![0usize; e];
    let mut mass = 0.0f64;
    for (vars, data) in &tensors {
        // Target variable order: current open vars, then new ones.
        let mut target = open.clone();
        for &v in vars {
            if !target.contains(&v) {
                target.push(v);
            }
        }
        let t_dims = target.len();
        let t_size = n_usize.pow(t_dims as u32);
        let mut expanded = vec![Complex64::new(0.0, 0.0); t_size];
        let open_pos: Vec<usize> = open
            .iter()
            .map(|v| target.iter().position(|x| x == v).unwrap())
            .collect();
        let block_pos: Vec<usize> = vars
            .iter()
            .map(|v| target.iter().position(|x| x == v).unwrap())
            .collect();
        let mut idx = vec![0usize; t_dims];
        for slot in expanded.iter_mut() {
            let mut f_index = 0usize;
            for (k, &p) in open_pos.iter().enumerate() {
                f_index += idx[p] * n_usize.pow(k as u32);
            }
            let mut b_index = 0usize;
            for (k, &p) in block_pos.iter().enumerate() {
                b_index += idx[p] * n_usize.pow(k as u32);
            }
            *slot = frontier[f_index] * data[b_index];
            let mut carry = 0;
            while carry < t_dims {
                idx[carry] += 1;
                if idx[carry] < n_usize {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
        }
        // Mark occurrences and sum out completed variables.
        for &v in vars {
            seen[v] += 1;
        }
        let keep: Vec<usize> = target
            .iter()
            .copied()
            .filter(|&v| seen[v] < occurrences[v])
            .collect();
        if keep.len() == target.len() {
            open = target;
            frontier = expanded;
            continue;
        }
        let k_dims = keep.len();
        let k_size = n_usize.pow(k_dims as u32);
        let keep_pos: Vec<usize> = keep
            .iter()
            .map(|v| target.iter().position(|x| x == v).unwrap())
            .collect();
        let mut reduced = vec![Complex64::new(0.0, 0.0); k_size];
        let mut idx = vec![0usize; t_dims];
        for value in &expanded {
            let mut k_index = 0usize;
            for (k, &p) in keep_pos.iter().enumerate() {
                k_index += idx[p] * n_usize.pow(k as u32);
            }
            reduced[k_index] += value;
            mass += value.norm();
            let mut carry = 0;
            while carry < t_dims {
                idx[carry] += 1;
                if idx[carry] < n_usize {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
        }
        open = keep;
        frontier = reduced;
    }
    debug_assert!(open.is_empty(), "all variables summed out");
    let scalar = frontier[0];
    let prefactor = (level as f64).powf(-((e as f64) + 1.0) / 2.0);
    let value = scalar * log_scale.exp() * prefactor;
    let states = (level as u128).pow(e as u32);
    Ok(StateSumResult {
        value,
        level,
        term_count: states,
        error_bound: sum_error_bound(mass, n_usize.pow(2)) * log_scale.exp() * prefactor,
        strategy: ContractionStrategy::TensorNetwork,
    })
}

// ---------------------------------------------------------------------------
// Smooth per-term tables for integration
// ---------------------------------------------------------------------------

/// Interpolated e^{φ_N(c0 + x)} along one real difference coordinate.
///
/// The poles of e^{φ_N} sit at t ∈ 1 + (1/N)ℤ_{≥0} and its zeros at
/// t ∈ −(1/N)ℤ_{≥1}, with known multiplicities.  The table stores the smooth
/// remainder after dividing those rational factors out, so interpolation
/// stays accurate even when Im c0 puts a pole close to the real line.
#[derive(Debug, Clone)]
pub struct SmoothTermTable {
    exp_sign: i8,
    pos: Option<usize>,
    neg: Option<usize>,
    c0: Complex64,
    x_lo: f64,
    h: f64,
    /// (location, order): e^{φ_N(c0+x)} = smooth(x) · ∏ (x − loc)^order.
    rational: Vec<(Complex64, i32)>,
    values: Vec<Complex64>,
}

/// Poles (negative order) and zeros (positive order) of e^{φ_N(c0 + x)} with
/// Re(c0 + x) in the given window.
fn singular_factors(level: i64, c0: Complex64, t_min: f64, t_max: f64) -> Vec<(Complex64, i32)> {
    let nf = level as f64;
    let mut out = Vec::new();
    // Poles at t = 1 + j/N, j ≥ 0, multiplicity floor(j/N) + 1.
    let j_lo = (((t_min - 1.0) * nf).floor() as i64).max(0);
    let j_hi = ((t_max - 1.0) * nf).ceil() as i64;
    for j in j_lo..=j_hi.max(j_lo - 1) {
        let t0 = 1.0 + j as f64 / nf;
        if t0 < t_min || t0 > t_max {
            continue;
        }
        let mult = (j / level + 1) as i32;
        out.push((Complex64::new(t0, 0.0) - c0, -mult));
    }
    // Zeros at t = −s/N, s ≥ 1, multiplicity floor((s−1)/N) + 1.
    let s_lo = (((-t_max) * nf).floor() as i64).max(1);
    let s_hi = ((-t_min) * nf).ceil() as i64;
    for sidx in s_lo..=s_hi.max(s_lo - 1) {
        let t0 = -(sidx as f64) / nf;
        if t0 < t_min || t0 > t_max {
            continue;
        }
        let mult = ((sidx - 1) / level + 1) as i32;
        out.push((Complex64::new(t0, 0.0) - c0, mult));
    }
    out
}

impl SmoothTermTable {
    fn rational_factor(&self, x: f64) -> Complex64 {
        let mut f = Complex64::new(1.0, 0.0);
        for (loc, order) in &self.rational {
            f *= (Complex64::new(x, 0.0) - loc).powi(*order);
        }
        f
    }

    fn eval_x(&self, x: f64) -> Complex64 {
        // 6-point Lagrange interpolation of the smooth part on the uniform
        // grid (nodes at offsets −2..3 around the bracketing interval).
        let u = (x - self.x_lo) / self.h;
        let i0 = (u.floor() as usize).clamp(2, self.values.len() - 4);
        let s = u - i0 as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, off) in (-2i64..=3).enumerate() {
            let mut w = 1.0f64;
            for k in -2i64..=3 {
                if k != off {
                    w *= (s - k as f64) / (off - k) as f64;
                }
            }
            acc += self.values[(i0 as i64 + off) as usize] * w;
            let _ = j;
        }
        acc * self.rational_factor(x)
    }

    /// Exact evaluation for validation.
    pub fn exact(&self, ctx: &QDilogContext, x: f64) -> Result<Complex64, DilogError> {
        ctx.pfl_exp(self.c0 + Complex64::new(x, 0.0))
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CachedTerm {
    exp_sign: i8,
    pos: Option<usize>,
    neg: Option<usize>,
    c0: [f64; 2],
    x_lo: f64,
    h: f64,
    rational: Vec<([f64; 2], i32)>,
    values: Vec<[f64; 2]>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CachedTables {
    terms: Vec<CachedTerm>,
}

/// The integrand f(t) = exp(N·𝒜(β/N + t)) over the unit cube, evaluated from
/// per-term tables plus one linear exponential.
#[derive(Debug, Clone)]
pub struct LatticeIntegrand {
    pub num_vars: usize,
    pub level: i64,
    terms: Vec<SmoothTermTable>,
    lin_coeffs: Vec<Complex64>,
    lin_const: Complex64,
}

impl LatticeIntegrand {
    /// Build with an optional on-disk cache of the per-term tables, keyed by
    /// the action structure, β, μ, N and the grid density.
    pub fn build_cached(
        d: &OpenDiagram,
        action: &SymbolicAction,
        lc: &LogColoring,
        nodes_per_unit: usize,
        cache_dir: Option<&std::path::Path>,
    ) -> Result<Self, QuantizeError> {
        let Some(dir) = cache_dir else {
            return Self::build(d, action, lc, nodes_per_unit);
        };
        let key = {
            use std::hash::{Hash, Hasher};
            let mut h = std::collections::hash_map::DefaultHasher::new();
            action.canonical_text().hash(&mut h);
            action.level().unwrap_or(0).hash(&mut h);
            lc.mu.re.to_bits().hash(&mut h);
            lc.mu.im.to_bits().hash(&mut h);
            for b in &lc.beta {
                b.0.re.to_bits().hash(&mut h);
                b.0.im.to_bits().hash(&mut h);
            }
            nodes_per_unit.hash(&mut h);
            format!("holoknot-tables-{:016x}.json", h.finish())
        };
        let path = dir.join(&key);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(cached) = serde_json::from_str::<CachedTables>(&text) {
                if let Some(f) = Self::from_cache(d, action, lc, cached) {
                    return Ok(f);
                }
            }
        }
        let built = Self::build(d, action, lc, nodes_per_unit)?;
        let _ = std::fs::create_dir_all(dir);
        let _ = std::fs::write(&path, serde_json::to_string(&built.to_cache()).unwrap());
        Ok(built)
    }

    fn to_cache(&self) -> CachedTables {
        CachedTables {
            terms: self
                .terms
                .iter()
                .map(|t| CachedTerm {
                    exp_sign: t.exp_sign,
                    pos: t.pos,
                    neg: t.neg,
                    c0: [t.c0.re, t.c0.im],
                    x_lo: t.x_lo,
                    h: t.h,
                    rational: t
                        .rational
                        .iter()
                        .map(|(z, k)| ([z.re, z.im], *k))
                        .collect(),
                    values: t.values.iter().map(|z| [z.re, z.im]).collect(),
                })
                .collect(),
        }
    }

    fn from_cache(
        d: &OpenDiagram,
        action: &SymbolicAction,
        lc: &LogColoring,
        cached: CachedTables,
    ) -> Option<Self> {
        let level = action.level()?;
        if cached.terms.len() != 4 * action.blocks.len() {
            return None;
        }
        let terms = cached
            .terms
            .into_iter()
            .map(|t| SmoothTermTable {
                exp_sign: t.exp_sign,
                pos: t.pos,
                neg: t.neg,
                c0: Complex64::new(t.c0[0], t.c0[1]),
                x_lo: t.x_lo,
                h: t.h,
                rational: t
                    .rational
                    .into_iter()
                    .map(|(z, k)| (Complex64::new(z[0], z[1]), k))
                    .collect(),
                values: t
                    .values
                    .into_iter()
                    .map(|z| Complex64::new(z[0], z[1]))
                    .collect(),
            })
            .collect();
        let (lin_coeffs, lin_const) = Self::linear_parts(d, action, lc);
        Some(LatticeIntegrand {
            num_vars: d.num_internal(),
            level,
            terms,
            lin_coeffs,
            lin_const,
        })
    }

    fn linear_parts(
        d: &OpenDiagram,
        action: &SymbolicAction,
        lc: &LogColoring,
    ) -> (Vec<Complex64>, Complex64) {
        let nf = action.level().expect("quantum action") as f64;
        let beta = lc.beta_values();
        let kind = &action.kind;
        let mut lin_coeffs = vec![Complex64::new(0.0, 0.0); d.num_internal()];
        let mut lin_const = Complex64::new(0.0, 0.0);
        for block in &action.blocks {
            let pref = block.prefactor as f64;
            lin_const += block.lin_const.value(kind) * pref;
            for (var, coeff) in &block.lin_coeffs {
                let c = coeff.value(kind) * pref;
                lin_const += c * beta[*var] / nf;
                lin_coeffs[*var] += c;
            }
        }
        (
            lin_coeffs.into_iter().map(|c| TAU_I * c).collect(),
            TAU_I * lin_const,
        )
    }

    pub fn build(
        d: &OpenDiagram,
        action: &SymbolicAction,
        lc: &LogColoring,
        nodes_per_unit: usize,
    ) -> Result<Self, QuantizeError> {
        let level = action.level().expect("quantum action");
        let ctx = QDilogContext::new(level)?;
        let beta = lc.beta_values();
        let nf = level as f64;
        let kind = &action.kind;
        // Gather term specs.
        let mut specs = Vec::new();
        for block in &action.blocks {
            for term in &block.dilogs {
                let mut c0 = term.arg.cst.value(kind);
                if let Some(p) = term.arg.pos {
                    c0 += beta[p] / nf;
                }
                if let Some(q) = term.arg.neg {
                    c0 -= beta[q] / nf;
                }
                specs.push((block.prefactor * term.sign, term.arg.pos, term.arg.neg, c0));
            }
        }
        let h = 1.0 / (nodes_per_unit as f64);
        let x_lo = -1.0 - 4.0 * h;
        let count = (2.0 + 8.0 * h) / h;
        let count = count.ceil() as usize + 1;
        let terms: Result<Vec<SmoothTermTable>, QuantizeError> = specs
            .into_par_iter()
            .map(|(exp_sign, pos, neg, c0)| {
                let x_hi = x_lo + (count - 1) as f64 * h;
                let rational =
                    singular_factors(level, c0, c0.re + x_lo - 1.2, c0.re + x_hi + 1.2);
                let values: Result<Vec<Complex64>, DilogError> = (0..count)
                    .map(|i| {
                        let x = x_lo + i as f64 * h;
                        let raw = ctx.pfl_exp(c0 + Complex64::new(x, 0.0))?;
                        let mut smooth = raw;
                        for (loc, order) in &rational {
                            smooth *= (Complex64::new(x, 0.0) - loc).powi(-order);
                        }
                        Ok(smooth)
                    })
                    .collect();
                Ok(SmoothTermTable {
                    exp_sign,
                    pos,
                    neg,
                    c0,
                    x_lo,
                    h,
                    rational,
                    values: values?,
                })
            })
            .collect();
        let terms = terms?;
        let (lin_coeffs, lin_const) = Self::linear_parts(d, action, lc);
        Ok(LatticeIntegrand {
            num_vars: d.num_internal(),
            level,
            terms,
            lin_coeffs,
            lin_const,
        })
    }

    /// f(t) for t in the unit cube.
    pub fn eval(&self, t: &[f64]) -> Complex64 {
        let mut product = Complex64::new(1.0, 0.0);
        for term in &self.terms {
            let mut x = 0.0;
            if let Some(p) = term.pos {
                x += t[p];
            }
            if let Some(q) = term.neg {
                x -= t[q];
            }
            let v = term.eval_x(x);
            if term.exp_sign > 0 {
                product *= v;
            } else {
                product /= v;
            }
        }
        let mut lin = self.lin_const;
        for (c, tv) in self.lin_coeffs.iter().zip(t) {
            lin += c * *tv;
        }
        product * lin.exp()
    }

    /// Worst relative interpolation error over a sample of arguments.
    pub fn validate_tables(&self, samples: usize) -> Result<f64, DilogError> {
        let ctx = QDilogContext::new(self.level)?;
        let mut worst = 0.0f64;
        for term in &self.terms {
            for s in 0..samples {
                let x = -1.0 + 2.0 * (s as f64 + 0.371) / samples as f64;
                let exact = term.exact(&ctx, x)?;
                let interp = term.eval_x(x);
                worst = worst.max((exact - interp).norm() / exact.norm().max(1e-300));
            }
        }
        Ok(worst)
    }

    /// Distance from the closest dilogarithm argument to the singular set
    /// along the real contour (minimum |Im c0| over terms).
    pub fn min_singularity_distance(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.c0.im.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

// ---------------------------------------------------------------------------
// Quasi-Monte Carlo lattice rule
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct QmcOptions {
    pub n_points: u64,
    pub shifts: u32,
    pub seed: u64,
    /// Table density per unit length (per-term 1-D grids).
    pub nodes_per_unit: usize,
    /// Per-axis node count of the tensor grid used for box partial sums.
    pub grid_per_axis: usize,
}

impl Default for QmcOptions {
    fn default() -> Self {
        QmcOptions {
            n_points: 65_537,
            shifts: 8,
            seed: 20_240_601,
            nodes_per_unit: 384,
            grid_per_axis: 24,
        }
    }
}

/// Korobov generator z = (1, ℓ, ℓ², ...) mod n minimizing the P₂ criterion
/// over a deterministic candidate slate.
pub fn korobov_generator(n: u64, dim: usize) -> Vec<u64> {
    let mut best_l = 1u64;
    let mut best_score = f64::INFINITY;
    let candidates: Vec<u64> = (0..96)
        .map(|k| 2 + ((n - 3) as u128 * (2 * k as u128 + 1) / 192) as u64)
        .collect();
    for &l in &candidates {
        // z_d = l^d mod n.
        let mut z = vec![1u64; dim];
        for dd in 1..dim {
            z[dd] = ((z[dd - 1] as u128 * l as u128) % n as u128) as u64;
        }
        // P₂(z) = −1 + (1/n) Σ_j ∏_d (1 + 2π² B₂({j z_d / n})).
        let mut acc = 0.0f64;
        let mut j_z = vec![0u64; dim];
        for _j in 0..n {
            let mut prod = 1.0f64;
            for dd in 0..dim {
                let x = j_z[dd] as f64 / n as f64;
                let b2 = x * x - x + 1.0 / 6.0;
                prod *= 1.0 + 2.0 * PI * PI * b2;
            }
            acc += prod;
            for dd in 0..dim {
                j_z[dd] = (j_z[dd] + z[dd]) % n;
            }
        }
        let score = acc / n as f64 - 1.0;
        if score < best_score {
            best_score = score;
            best_l = l;
        }
    }
    let mut z = vec![1u64; dim];
    for dd in 1..dim {
        z[dd] = ((z[dd - 1] as u128 * best_l as u128) % n as u128) as u64;
    }
    z
}

#[derive(Debug, Clone, Serialize)]
pub struct StateIntegralResult {
    pub k: Vec<i64>,
    #[serde(with = "crate::util::cpx_serde")]
    pub value: Complex64,
    /// Standard error over the random shifts.
    pub error_estimate: f64,
    pub node_budget: u64,
    pub min_singularity_distance: f64,
}

/// Randomized rank-1 lattice estimate of ∫ f(t)·e^{−2πiN k·t} dt.
pub fn state_integral(
    d: &OpenDiagram,
    lc: &LogColoring,
    level: i64,
    k: &[i64],
    opts: &QmcOptions,
) -> Result<StateIntegralResult, QuantizeError> {
    let action = build_quantum_action(d, lc.mu, level);
    let f = LatticeIntegrand::build(d, &action, lc, opts.nodes_per_unit)?;
    state_integral_with(&f, k, opts)
}

pub fn state_integral_with(
    f: &LatticeIntegrand,
    k: &[i64],
    opts: &QmcOptions,
) -> Result<StateIntegralResult, QuantizeError> {
    let dim = f.num_vars;
    let z = korobov_generator(opts.n_points, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shifts: Vec<Vec<f64>> = (0..opts.shifts)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let nf = f.level as f64;
    let estimates: Vec<Complex64> = shifts
        .par_iter()
        .map(|shift| {
            let mut acc = NeumaierC::default();
            let mut t = vec![0.0f64; dim];
            for j in 0..opts.n_points {
                for dd in 0..dim {
                    let x = (j as u128 * z[dd] as u128 % opts.n_points as u128) as f64
                        / opts.n_points as f64;
                    t[dd] = frac(x + shift[dd]);
                }
                let mut phase = 0.0f64;
                for (ki, ti) in k.iter().zip(&t) {
                    phase += *ki as f64 * ti;
                }
                let twist = Complex64::from_polar(1.0, -std::f64::consts::TAU * nf * phase);
                acc.add(f.eval(&t) * twist);
            }
            acc.value() / opts.n_points as f64
        })
        .collect();
    let mean = estimates.iter().sum::<Complex64>() / estimates.len() as f64;
    let var = estimates
        .iter()
        .map(|e| (e - mean).norm_sqr())
        .sum::<f64>()
        / (estimates.len().max(2) as f64 * (estimates.len().max(2) - 1) as f64);
    Ok(StateIntegralResult {
        k: k.to_vec(),
        value: mean,
        error_estimate: var.sqrt(),
        node_budget: opts.n_points * opts.shifts as u64,
        min_singularity_distance: f.min_singularity_distance(),
    })
}

/// Tensor-product Gauss-Legendre integration for small dimension.
pub fn state_integral_gauss(
    f: &LatticeIntegrand,
    k: &[i64],
    panels: usize,
) -> Result<StateIntegralResult, QuantizeError> {
    if f.num_vars > 4 {
        return Err(QuantizeError::TooManyDims(f.num_vars));
    }
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
    // 1-D nodes/weights over [0, 1] with `panels` panels.
    let mut nodes = Vec::new();
    for p in 0..panels {
        let a = p as f64 / panels as f64;
        let b = (p + 1) as f64 / panels as f64;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for i in 0..8 {
            nodes.push((mid - half * X[i], half * W[i]));
            nodes.push((mid + half * X[i], half * W[i]));
        }
    }
    let dim = f.num_vars;
    let nf = f.level as f64;
    let mut acc = NeumaierC::default();
    let total = nodes.len().pow(dim as u32);
    let mut idx = vec![0usize; dim];
    let mut t = vec![0.0f64; dim];
    for _ in 0..total {
        let mut w = 1.0f64;
        for dd in 0..dim {
            let (x, wx) = nodes[idx[dd]];
            t[dd] = x;
            w *= wx;
        }
        let mut phase = 0.0f64;
        for (ki, ti) in k.iter().zip(&t) {
            phase += *ki as f64 * ti;
        }
        let twist = Complex64::from_polar(1.0, -std::f64::consts::TAU * nf * phase);
        acc.add(f.eval(&t) * twist * w);
        let mut carry = 0;
        while carry < dim {
            idx[carry] += 1;
            if idx[carry] < nodes.len() {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
    }
    Ok(StateIntegralResult {
        k: k.to_vec(),
        value: acc.value(),
        error_estimate: f64::NAN,
        node_budget: total as u64,
        min_singularity_distance: f.min_singularity_distance(),
    })
}

// ---------------------------------------------------------------------------
// Partial sums of state integrals (the finite-level identity)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PartialSumRow {
    pub k_max: i64,
    #[serde(with = "crate::util::cpx_serde")]
    pub raw: Complex64,
    pub raw_error: f64,
    #[serde(with = "crate::util::cpx_serde")]
    pub cesaro: Complex64,
    pub cesaro_error: f64,
    pub raw_deviation: f64,
    pub cesaro_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    #[serde(with = "crate::util::cpx_serde")]
    pub state_sum: Complex64,
    pub rows: Vec<PartialSumRow>,
    /// min(raw, Fejér) deviation at K = k_max, relative to |Z|.
    pub final_relative_error: f64,
    /// Monotone decrease (within error bars) of the Fejér sequence.
    pub strictly_decreasing: bool,
    /// Monotone decrease (within error bars) of the raw sequence.
    pub raw_strictly_decreasing: bool,
}

/// S_K = N^{(|E|−1)/2} Σ_{‖k‖∞≤K} I_k for K = 0..k_max, raw and with Fejér
/// box averaging, compared against the state sum.
///
/// The box sum over k collapses into a product of one-dimensional Dirichlet
/// kernels (Fejér kernels for the averaged version), so S_K is an integral
/// of f times a trigonometric polynomial.  It is evaluated with an equal
/// weight tensor grid, which integrates the kernel part exactly and whose
/// aliasing error is estimated by comparing against a coarser grid.
pub fn theorem_partial_sum(
    d: &OpenDiagram,
    lc: &LogColoring,
    level: i64,
    k_max: i64,
    opts: &QmcOptions,
) -> Result<TheoremReport, QuantizeError> {
    let zres = state_sum(d, lc, level)?;
    let z = zres.value;
    let action = build_quantum_action(d, lc.mu, level);
    let f = LatticeIntegrand::build(d, &action, lc, opts.nodes_per_unit)?;
    let m_full = opts.grid_per_axis.max(2 * (level as usize) * (k_max as usize + 1) + 4);
    let m_coarse = (2 * m_full / 3).max(m_full - 4);

    let full = grid_box_sums(&f, level, k_max, m_full);
    let coarse = grid_box_sums(&f, level, k_max, m_coarse);

    let ks = (k_max + 1) as usize;
    let mut rows = Vec::with_capacity(ks);
    for kk in 0..ks {
        let raw = full.0[kk];
        let cesaro = full.1[kk];
        let raw_error = (raw - coarse.0[kk]).norm();
        let cesaro_error = (cesaro - coarse.1[kk]).norm();
        rows.push(PartialSumRow {
            k_max: kk as i64,
            raw,
            raw_error,
            cesaro,
            cesaro_error,
            raw_deviation: (raw - z).norm(),
            cesaro_deviation: (cesaro - z).norm(),
        });
    }
    let strictly_decreasing = rows.windows(2).all(|w| {
        w[1].cesaro_deviation < w[0].cesaro_deviation + w[1].cesaro_error + w[0].cesaro_error
    });
    let raw_strictly_decreasing = rows
        .windows(2)
        .all(|w| w[1].raw_deviation < w[0].raw_deviation + w[1].raw_error + w[0].raw_error);
    let final_relative_error = rows
        .last()
        .map(|r| r.cesaro_deviation.min(r.raw_deviation) / z.norm())
        .unwrap_or(f64::NAN);
    Ok(TheoremReport {
        state_sum: z,
        rows,
        final_relative_error,
        strictly_decreasing,
        raw_strictly_decreasing,
    })
}

/// Raw (Dirichlet) and Fejér box sums on an equal-weight m^E grid, already
/// normalized by N^{(|E|−1)/2}.
fn grid_box_sums(
    f: &LatticeIntegrand,
    level: i64,
    k_max: i64,
    m: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let dim = f.num_vars;
    let nf = level as f64;
    let ks = (k_max + 1) as usize;
    let norm = nf.powf((dim as f64 - 1.0) / 2.0);
    // Parallel over the first axis; deterministic reduction in index order.
    let partials: Vec<(Vec<NeumaierC>, Vec<NeumaierC>)> = (0..m)
        .into_par_iter()
        .map(|first| {
            let mut raw = vec![NeumaierC::default(); ks];
            let mut ces = vec![NeumaierC::default(); ks];
            let inner = m.pow(dim as u32 - 1);
            let mut idx = vec![0usize; dim - 1];
            let mut t = vec![0.0f64; dim];
            t[0] = first as f64 / m as f64;
            // Per-axis kernel caches for the first coordinate.
            let k0: Vec<(f64, f64)> = (0..ks)
                .map(|kk| {
                    let x = nf * t[0];
                    (dirichlet_kernel(kk as i64, x), fejer_kernel(kk as i64, x))
                })
                .collect();
            for _ in 0..inner {
                for dd in 1..dim {
                    t[dd] = idx[dd - 1] as f64 / m as f64;
                }
                let fv = f.eval(&t);
                for kk in 0..ks {
                    let mut dprod = k0[kk].0;
                    let mut fprod = k0[kk].1;
                    for dd in 1..dim {
                        let x = nf * t[dd];
                        dprod *= dirichlet_kernel(kk as i64, x);
                        fprod *= fejer_kernel(kk as i64, x);
                    }
                    raw[kk].add(fv * dprod);
                    ces[kk].add(fv * fprod);
                }
                let mut carry = 0;
                while carry < dim - 1 {
                    idx[carry] += 1;
                    if idx[carry] < m {
                        break;
                    }
                    idx[carry] = 0;
                    carry += 1;
                }
            }
            (raw, ces)
        })
        .collect();
    let total = m.pow(dim as u32) as f64;
    let mut raw = vec![Complex64::new(0.0, 0.0); ks];
    let mut ces = vec![Complex64::new(0.0, 0.0); ks];
    for (r, c) in &partials {
        for kk in 0..ks {
            raw[kk] += r[kk].value();
            ces[kk] += c[kk].value();
        }
    }
    for kk in 0..ks {
        raw[kk] = raw[kk] / total * norm;
        ces[kk] = ces[kk] / total * norm;
    }
    (raw, ces)
}

/// Choose a log-coloring branch along which the box partial sums converge
/// fastest: the k-sum is conditionally convergent and integer shifts of β
/// (which leave Z and the lattice values unchanged) reshape the integrand
/// between lattice points.  Candidates are the principal branch and all
/// single-coordinate ±1 shifts, ranked by the raw K = k_max deviation on a
/// coarse grid.
pub fn select_log_branch(
    d: &OpenDiagram,
    lc: &LogColoring,
    level: i64,
    k_max: i64,
) -> Result<(LogColoring, Vec<i64>), QuantizeError> {
    let zres = state_sum(d, lc, level)?;
    let z = zres.value;
    let dim = d.num_internal();
    let mut candidates: Vec<Vec<i64>> = vec![vec![0; dim]];
    for i in 0..dim {
        for sgn in [1i64, -1] {
            let mut v = vec![0i64; dim];
            v[i] = sgn;
            candidates.push(v);
        }
    }
    let mut best: Option<(f64, LogColoring, Vec<i64>)> = None;
    for shifts in candidates {
        let mut cand = lc.clone();
        for (b, s) in cand.beta.iter_mut().zip(&shifts) {
            *b = Cpx(b.0 + Complex64::new(*s as f64, 0.0));
        }
        let action = build_quantum_action(d, cand.mu, level);
        let Ok(f) = LatticeIntegrand::build(d, &action, &cand, 64) else {
            continue;
        };
        // Aliasing-safe coarse grid: the kernels reach frequency N·k_max.
        let m_coarse = (2 * level as usize * (k_max as usize + 1) + 2).max(16);
        let (raw, _) = grid_box_sums(&f, level, k_max, m_coarse);
        let dev = (raw[k_max as usize] - z).norm();
        if best.as_ref().map(|b| dev < b.0).unwrap_or(true) {
            best = Some((dev, cand, shifts));
        }
    }
    let (_, lc_best, shifts) = best.expect("principal branch always evaluates");
    Ok((lc_best, shifts))
}

fn dirichlet_kernel(k: i64, x: f64) -> f64 {
    // Σ_{|j|≤k} e^{−2πi j x} = sin((2k+1)πx)/sin(πx).
    let s = (PI * x).sin();
    if s.abs() < 1e-9 {
        (2 * k + 1) as f64
    } else {
        ((2 * k + 1) as f64 * PI * x).sin() / s
    }
}

fn fejer_kernel(k: i64, x: f64) -> f64 {
    // Σ_{|j|≤k} (1 − |j|/(k+1)) e^{−2πi j x} = (1/(k+1))(sin((k+1)πx)/sin(πx))².
    let s = (PI * x).sin();
    if s.abs() < 1e-9 {
        (k + 1) as f64
    } else {
        let t = ((k + 1) as f64 * PI * x).sin() / s;
        t * t / (k + 1) as f64
    }
}

// ---------------------------------------------------------------------------
// 1-D Fourier verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct FourierReport {
    pub axis: usize,
    pub k_max: usize,
    pub sample_count: usize,
    /// Worst relative reconstruction error at the N lattice points on the
    /// line, by symmetric partial sums.
    pub partial_error: f64,
    /// Same with Fejér (Cesàro) averaging.
    pub cesaro_error: f64,
    /// Same pair at half the cutoff.
    pub partial_error_half: f64,
    pub cesaro_error_half: f64,
    /// |f(0) − f(1⁻)| wrap mismatch along the axis through the base point.
    pub wrap_jump: f64,
}

/// Restrict f to one axis through a lattice base point, compute its Fourier
/// coefficients by FFT, and reconstruct the lattice values by partial and
/// Fejér sums.
pub fn fourier_verify_1d(
    d: &OpenDiagram,
    lc: &LogColoring,
    level: i64,
    axis: usize,
    base: &[i64],
    k_max: usize,
    opts: &QmcOptions,
) -> Result<FourierReport, QuantizeError> {
    let action = build_quantum_action(d, lc.mu, level);
    let f = LatticeIntegrand::build(d, &action, lc, opts.nodes_per_unit)?;
    let dim = f.num_vars;
    let nf = level as f64;
    let m = (8 * k_max.next_power_of_two()).max(4096);

    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> = (0..m)
        .map(|j| {
            let mut t = vec![0.0f64; dim];
            for (dd, tval) in t.iter_mut().enumerate() {
                *tval = base[dd] as f64 / nf;
            }
            t[axis] = j as f64 / m as f64;
            let v = f.eval(&t);
            rustfft::num_complex::Complex::new(v.re, v.im)
        })
        .collect();
    let wrap_jump = {
        let mut t0 = vec![0.0f64; dim];
        let mut t1 = vec![0.0f64; dim];
        for dd in 0..dim {
            t0[dd] = base[dd] as f64 / nf;
            t1[dd] = base[dd] as f64 / nf;
        }
        t0[axis] = 0.0;
        t1[axis] = 1.0 - 1e-9;
        (f.eval(&t0) - f.eval(&t1)).norm()
    };
    fft.process(&mut buf);
    // Coefficient c_k = (1/M) Σ_j g(j/M) e^{−2πi k j/M}: rustfft's forward
    // transform uses the same sign, so c_k = buf[k]/M (k mod M).
    let coeff = |k: i64| -> Complex64 {
        let idx = k.rem_euclid(m as i64) as usize;
        Complex64::new(buf[idx].re, buf[idx].im) / m as f64
    };

    let reconstruct = |s: f64, cutoff: usize, fejer: bool| -> Complex64 {
        let mut acc = NeumaierC::default();
        for k in -(cutoff as i64)..=(cutoff as i64) {
            let w = if fejer {
                1.0 - (k.unsigned_abs() as f64) / (cutoff as f64 + 1.0)
            } else {
                1.0
            };
            acc.add(coeff(k) * Complex64::from_polar(w, std::f64::consts::TAU * k as f64 * s));
        }
        acc.value()
    };

    // Direct values at the N lattice points along the axis.
    let mut scale = 0.0f64;
    let direct: Vec<(f64, Complex64)> = (0..level)
        .map(|p| {
            let s = p as f64 / nf;
            let mut t = vec![0.0f64; dim];
            for dd in 0..dim {
                t[dd] = base[dd] as f64 / nf;
            }
            t[axis] = s;
            let v = f.eval(&t);
            scale = scale.max(v.norm());
            (s, v)
        })
        .collect();
    let scale = scale.max(1e-300);

    let mut worst = [0.0f64; 4]; // partial, cesaro, partial_half, cesaro_half
    for (s, v) in &direct {
        let p_full = reconstruct(*s, k_max, false);
        let c_full = reconstruct(*s, k_max, true);
        let p_half = reconstruct(*s, k_max / 2, false);
        let c_half = reconstruct(*s, k_max / 2, true);
        worst[0] = worst[0].max((p_full - v).norm() / scale);
        worst[1] = worst[1].max((c_full - v).norm() / scale);
        worst[2] = worst[2].max((p_half - v).norm() / scale);
        worst[3] = worst[3].max((c_half - v).norm() / scale);
    }
    Ok(FourierReport {
        axis,
        k_max,
        sample_count: m,
        partial_error: worst[0],
        cesaro_error: worst[1],
        partial_error_half: worst[2],
        cesaro_error_half: worst[3],
        wrap_jump,
    })
}

// ---------------------------------------------------------------------------
// Character-sum orthogonality
// ---------------------------------------------------------------------------

/// Exact statement of Σ_{n∈[N]^E} e^{2πi k·n/N}:
/// the sum is N^E when N divides every component of k and 0 otherwise.
///
/// Verified in integer arithmetic: for one axis, the residues k·n mod N hit
/// exactly the multiples of g = gcd(k, N), each g times; the g-fold sum over
/// the complete set of (N/g)-th roots of unity vanishes unless N/g = 1.
pub fn character_sum_is_full(k: &[i64], n: u64) -> bool {
    k.iter().all(|ki| ki.rem_euclid(n as i64) == 0)
}

/// Integer verification of the residue-multiset structure for one axis;
/// returns (g, counts ok) with g = gcd(k mod N, N).
pub fn character_axis_structure(k: i64, n: u64) -> (u64, bool) {
    let kr = k.rem_euclid(n as i64) as u64;
    let g = gcd(kr, n);
    let mut counts = vec![0u64; n as usize];
    let mut r = 0u64;
    for _ in 0..n {
        counts[r as usize] += 1;
        r = (r + kr) % n;
    }
    let ok = (0..n).all(|res| {
        let expected = if res % g == 0 { g } else { 0 };
        counts[res as usize] == expected
    });
    (g, ok)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

// ---------------------------------------------------------------------------
// Scans and tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicScanRow {
    pub mu: i64,
    #[serde(with = "crate::util::cpx_serde")]
    pub value: Complex64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicScanReport {
    pub level: i64,
    pub rows: Vec<ParabolicScanRow>,
    /// μ with 2μ ≡ −1 (mod N).
    pub allowed_mu: i64,
    pub max_allowed: f64,
    pub max_disallowed: f64,
    /// max_allowed / max_disallowed (∞ when the disallowed mass vanishes).
    pub concentration_ratio: f64,
}

/// |Z_N| per integer log-meridian μ ∈ {0, …, N−1} for a boundary-parabolic
/// coloring (m = 1), N odd.
pub fn parabolic_vanishing_scan(
    d: &OpenDiagram,
    params: &ParameterSet,
    level: i64,
) -> Result<ParabolicScanReport, QuantizeError> {
    let allowed = ((level - 1) / 2) % level;
    let mut rows = Vec::new();
    for mu_int in 0..level {
        let mu = Complex64::new(mu_int as f64, 0.0);
        let lc = LogColoring::from_parameters(params, Some(mu))?;
        let value = state_sum(d, &lc, level)?.value;
        rows.push(ParabolicScanRow {
            mu: mu_int,
            value,
            magnitude: value.norm(),
        });
    }
    let max_allowed = rows
        .iter()
        .filter(|r| (2 * r.mu) % level == (level - 1) % level)
        .map(|r| r.magnitude)
        .fold(0.0f64, f64::max);
    let max_disallowed = rows
        .iter()
        .filter(|r| (2 * r.mu) % level != (level - 1) % level)
        .map(|r| r.magnitude)
        .fold(0.0f64, f64::max);
    Ok(ParabolicScanReport {
        level,
        rows,
        allowed_mu: allowed,
        max_allowed,
        max_disallowed,
        concentration_ratio: if max_disallowed > 0.0 {
            max_allowed / max_disallowed
        } else {
            f64::INFINITY
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsRow {
    pub level: i64,
    pub status: String,
    #[serde(with = "crate::util::cpx_serde")]
    pub value: Complex64,
    /// Re(log Z_N)/N (the growth-rate probe).
    pub log_mag_over_n: f64,
    pub arg_over_n: f64,
}

/// log Z_N / N per level, for inspection against a critical value; no
/// convergence is asserted.
pub fn asymptotics_table(
    d: &OpenDiagram,
    params: &ParameterSet,
    mu: Option<Complex64>,
    levels: &[i64],
) -> Vec<AsymptoticsRow> {
    levels
        .iter()
        .map(|&level| {
            let run = LogColoring::from_parameters(params, mu)
                .and_then(|lc| state_sum(d, &lc, level));
            match run {
                Ok(res) => AsymptoticsRow {
                    level,
                    status: "ok".into(),
                    value: res.value,
                    log_mag_over_n: res.value.norm().ln() / level as f64,
                    arg_over_n: res.value.arg() / level as f64,
                },
                Err(e) => AsymptoticsRow {
                    level,
                    status: format!("skipped: {e}"),
                    value: Complex64::new(f64::NAN, f64::NAN),
                    log_mag_over_n: f64::NAN,
                    arg_over_n: f64::NAN,
                },
            }
        })
        .collect()
}

/// The summand exp(N𝒜((β+n)/N)) at one lattice point (for the periodicity
/// diagnostics).
pub fn lattice_summand(
    d: &OpenDiagram,
    lc: &LogColoring,
    level: i64,
    n: &[i64],
) -> Result<Complex64, QuantizeError> {
    let action = build_quantum_action(d, lc.mu, level);
    let ctx = QDilogContext::new(level)?;
    let nf = level as f64;
    let t: Vec<Complex64> = lc
        .beta_values()
        .iter()
        .zip(n)
        .map(|(b, ni)| (b + Complex64::new(*ni as f64, 0.0)) / nf)
        .collect();
    Ok(action.eval_exp_n(&ctx, &t)?)
}
