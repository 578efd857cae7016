//! Quantized SL₂(ℂ) Chern-Simons knot invariants.
//!
//! This crate computes a level-N quantum invariant Z_N(K, ρ, μ) of a knot K,
//! a decorated SL₂(ℂ) representation ρ, and a log-meridian μ, starting from a
//! combinatorial open diagram of K.  The same diagram data drives three
//! pipelines:
//!
//! * a discrete **state sum** over [N]^E built from Faddeev quantum
//!   dilogarithms at b = √N ([`quantize::state_sum`]),
//! * a family of **state integrals** over [0,1]^E whose ℤ^E-sum reproduces
//!   the state sum through its Fourier series ([`quantize::state_integral`],
//!   [`quantize::theorem_partial_sum`]),
//! * the **classical** segment equations and critical points of the limiting
//!   action, whose critical values are Chern-Simons invariants and hyperbolic
//!   volumes ([`geometry`]).
//!
//! Module map:
//!
//! * [`diagram`] — open knot diagrams: crossings, segments, turnbacks, planar
//!   region structure.
//! * [`coloring`] — decorated SL₂(ℂ) colorings, shadow colorings on regions,
//!   gauge transformations, region/segment parameters.
//! * [`dilog`] — Faddeev's Φ_b, the level-N function e^{φ_N}, Li₂ and the
//!   branch-managed dilogarithm ℓ.
//! * [`action`] — the quantum action 𝒜_{D,μ} and classical action V as
//!   symbolic term lists, with evaluation at points.
//! * [`geometry`] — shape parameters, segment equations, Newton/L-M solving,
//!   critical points, flattenings, Chern-Simons/volume extraction.
//! * [`quantize`] — state sums (tensor contraction and brute force), state
//!   integrals (QMC), Fourier verification, diagnostic scans.

pub mod action;
pub mod coloring;
pub mod diagram;
pub mod dilog;
pub mod fixtures;
pub mod geometry;
pub mod linalg;
pub mod quantize;
pub mod report;
pub mod util;

pub use num_complex::Complex64;

/// Tolerances shared across the numeric pipeline.
///
/// All residual checks default to 1e-9; the `strict` profile tightens the
/// generic residual by an order of magnitude.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    /// Generic residual threshold (crossing relations, cycle closure, ...).
    pub residual: f64,
    /// Projective comparisons of eigenlines: |v1 ∧ v2| / (‖v1‖‖v2‖).
    pub projective: f64,
    /// Distance from a quantum dilogarithm argument to the singular lattice
    /// below which evaluation aborts.
    pub singularity: f64,
    /// Margin by which shape parameters must avoid the unit circle.
    pub unit_circle_margin: f64,
    /// Membership margin for the classical domain Ω_D (distance to the branch
    /// locus X).
    pub omega_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-9,
            projective: 1e-9,
            singularity: 1e-8,
            unit_circle_margin: 0.05,
            omega_margin: 1e-6,
        }
    }
}

impl Tolerances {
    /// The `strict` profile used by `--tolerance-profile strict`.
    pub fn strict() -> Self {
        Tolerances {
            residual: 1e-10,
            projective: 1e-10,
            ..Tolerances::default()
        }
    }
}
