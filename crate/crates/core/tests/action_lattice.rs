//! Lattice quasi-periodicity of the quantum action.
//!
//! Shifting one segment variable by 1 multiplies exp(N𝒜) by a_i/a_i', the
//! ratio of the two a-values of that segment; on solutions of the segment
//! equations the ratio is 1, making exp(N𝒜) ℤ^E-periodic on the evaluation
//! lattice.  These tests pin the crossing-prefactor convention: the factors
//! cancel with +Λ^ε on every crossing, including the rotated negative ones.

use holoknot_core::action::{
    build_quantum_action, build_quantum_action_with, PrefactorConvention,
};
use holoknot_core::coloring::{load_shadow, parameters};
use holoknot_core::diagram::{builtin, SegRef};
use holoknot_core::dilog::QDilogContext;
use holoknot_core::fixtures::{figure8_parabolic_rep, trefoil_generic_rep};
use holoknot_core::geometry::{segment_residuals, shape_parameters};
use holoknot_core::util::TAU_I;
use holoknot_core::{Complex64, Tolerances};

fn log_coloring(b: &[Complex64]) -> Vec<Complex64> {
    b.iter().map(|bi| bi.ln() / TAU_I).collect()
}

/// a_out/a_in per segment, from the segment-equation residuals.
fn a_ratios(
    d: &holoknot_core::diagram::OpenDiagram,
    b: &[Complex64],
    b_bdry: Complex64,
    m: Complex64,
) -> Vec<Complex64> {
    segment_residuals(d, b, b_bdry, m)
        .unwrap()
        .into_iter()
        .map(|r| r + Complex64::new(1.0, 0.0))
        .collect()
}

#[test]
fn trefoil_solution_is_lattice_periodic() {
    let d = builtin("trefoil").unwrap();
    let tol = Tolerances::default();
    let doc = trefoil_generic_rep();
    let shadow = load_shadow(&d, &doc, &tol).unwrap();
    let params = parameters(&shadow, &d, &tol);
    let m = params.m.0;
    let mu = m.ln() / TAU_I;
    let n = 3i64;
    let beta = log_coloring(&params.b_values());
    let action = build_quantum_action(&d, mu, n);
    let ctx = QDilogContext::new(n).unwrap();
    let base: Vec<Complex64> = beta.iter().map(|b| b / n as f64).collect();
    for i in 0..d.num_internal() {
        let f = action.quasi_periodicity_factor(&ctx, i, &base).unwrap();
        let err = (f - Complex64::new(1.0, 0.0)).norm();
        assert!(err < 1e-8, "segment {i}: factor {f}, err {err:.3e}");
    }
}

#[test]
fn trefoil_non_solution_factor_matches_a_ratio() {
    let d = builtin("trefoil").unwrap();
    let m = Complex64::new(1.2, 0.3);
    let mu = m.ln() / TAU_I;
    let n = 3i64;
    // A generic non-solution b.
    let b: Vec<Complex64> = (0..5)
        .map(|k| Complex64::from_polar(1.0 + 0.1 * k as f64, 0.5 + 0.35 * k as f64))
        .collect();
    let ratios = a_ratios(&d, &b, Complex64::new(1.0, 0.0), m);
    let beta = log_coloring(&b);
    let action = build_quantum_action(&d, mu, n);
    let ctx = QDilogContext::new(n).unwrap();
    let base: Vec<Complex64> = beta.iter().map(|z| z / n as f64).collect();
    for i in 0..d.num_internal() {
        let f = action.quasi_periodicity_factor(&ctx, i, &base).unwrap();
        let rel = (f - ratios[i]).norm() / ratios[i].norm();
        assert!(
            rel < 1e-8,
            "segment {i}: factor {f} vs a-ratio {} (rel {rel:.3e})",
            ratios[i]
        );
    }
}

#[test]
fn figure8_solution_is_lattice_periodic_under_all_plus() {
    let d = builtin("figure8").unwrap();
    let tol = Tolerances::default();
    let doc = figure8_parabolic_rep();
    let shadow = load_shadow(&d, &doc, &tol).unwrap();
    let params = parameters(&shadow, &d, &tol);
    assert!(params.admissible);
    // Boundary-parabolic: m = 1, μ = 0 is a valid log-meridian.
    let mu = Complex64::new(0.0, 0.0);
    let n = 3i64;
    let beta = log_coloring(&params.b_values());
    let ctx = QDilogContext::new(n).unwrap();
    let base: Vec<Complex64> = beta.iter().map(|z| z / n as f64).collect();

    let plus = build_quantum_action_with(&d, mu, n, PrefactorConvention::AllPlus);
    let mut worst_plus = 0.0f64;
    for i in 0..d.num_internal() {
        let f = plus.quasi_periodicity_factor(&ctx, i, &base).unwrap();
        worst_plus = worst_plus.max((f - Complex64::new(1.0, 0.0)).norm());
    }
    assert!(
        worst_plus < 1e-8,
        "all-plus convention should be periodic, worst {worst_plus:.3e}"
    );

    // The minus-prefactor alternative breaks periodicity at the segments of
    // the rotated negative crossing, confirming the all-plus reading.
    let minus = build_quantum_action_with(&d, mu, n, PrefactorConvention::MinusOnShiftedNegative);
    let mut worst_minus = 0.0f64;
    for i in 0..d.num_internal() {
        let f = minus.quasi_periodicity_factor(&ctx, i, &base).unwrap();
        worst_minus = worst_minus.max((f - Complex64::new(1.0, 0.0)).norm());
    }
    assert!(
        worst_minus > 1e-3,
        "minus convention unexpectedly periodic (worst {worst_minus:.3e})"
    );
}

#[test]
fn figure8_non_solution_factor_matches_a_ratio() {
    let d = builtin("figure8").unwrap();
    let m = Complex64::new(0.9, 0.4);
    let mu = m.ln() / TAU_I;
    let n = 2i64;
    let b: Vec<Complex64> = (0..7)
        .map(|k| Complex64::from_polar(0.9 + 0.07 * k as f64, 0.3 + 0.45 * k as f64))
        .collect();
    let ratios = a_ratios(&d, &b, Complex64::new(1.0, 0.0), m);
    let beta = log_coloring(&b);
    let action = build_quantum_action(&d, mu, n);
    let ctx = QDilogContext::new(n).unwrap();
    let base: Vec<Complex64> = beta.iter().map(|z| z / n as f64).collect();
    for i in 0..d.num_internal() {
        let f = action.quasi_periodicity_factor(&ctx, i, &base).unwrap();
        let rel = (f - ratios[i]).norm() / ratios[i].norm();
        assert!(
            rel < 1e-8,
            "segment {i}: factor {f} vs a-ratio {} (rel {rel:.3e})",
            ratios[i]
        );
    }
}

#[test]
fn figure8_unit_circle_margin_reportable() {
    // The parabolic fixture's shapes should already sit off the unit circle
    // (the fixture conjugator was chosen for that); record the margin.
    let d = builtin("figure8").unwrap();
    let tol = Tolerances::default();
    let doc = figure8_parabolic_rep();
    let shadow = load_shadow(&d, &doc, &tol).unwrap();
    let params = parameters(&shadow, &d, &tol);
    let shapes = shape_parameters(&d, &params.b_values(), params.b_boundary.0, params.m.0)
        .unwrap();
    let worst = shapes
        .all_values()
        .iter()
        .map(|z| (z.norm() - 1.0).abs())
        .fold(f64::INFINITY, f64::min);
    println!("figure8 parabolic fixture unit-circle margin: {worst:.4}");
    assert!(worst > 1e-4, "fixture sits on the unit circle");
    let _ = d.seg_name(SegRef::BoundaryIn);
}
