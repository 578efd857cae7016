//! Built-in representation fixtures for the sample diagrams.
//!
//! The figure-eight fixture is a boundary-parabolic representation (m = 1)
//! obtained by solving the diagram's defining relations numerically in the
//! standard two-generator parabolic form; the trefoil fixture has a generic
//! meridian eigenvalue.  Both are conjugated by a fixed SL₂(ℂ) matrix so the
//! eigenlines avoid the coordinate axes, giving admissible shadow colorings.

use num_complex::Complex64;

use crate::coloring::{
    expand_arc_coloring, normalize, parameters, propagate_shadow, ArcDoc, DecoratedMatrix, RepDoc,
    SegmentColoring,
};
use crate::diagram::{builtin, OpenDiagram, SegRef};
use crate::linalg::Mat2;
use crate::util::Cpx;
use crate::Tolerances;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Left eigenvector of g for the eigenvalue m⁻¹ (row vector, v·g = m⁻¹·v).
fn left_eigenvector(g: &Mat2, m: Complex64) -> [Complex64; 2] {
    let minv = 1.0 / m;
    let a = g.at(0, 0);
    let b = g.at(0, 1);
    let cc = g.at(1, 0);
    let d = g.at(1, 1);
    let v1 = [cc, minv - a];
    if v1[0].norm() + v1[1].norm() > 1e-12 {
        return v1;
    }
    [minv - d, b]
}

/// One Gauss-Newton pass for a single complex unknown against a small
/// residual vector, with central-difference derivatives.
fn gauss_newton_1var<F>(mut w: Complex64, residual: F, iters: usize) -> Complex64
where
    F: Fn(Complex64) -> Vec<Complex64>,
{
    let h = 1e-7;
    for _ in 0..iters {
        let r = residual(w);
        let rp = residual(w + c(h, 0.0));
        let rm = residual(w - c(h, 0.0));
        let mut jhj = 0.0f64;
        let mut jhr = Complex64::new(0.0, 0.0);
        for k in 0..r.len() {
            let j = (rp[k] - rm[k]) / (2.0 * h);
            jhj += j.norm_sqr();
            jhr += j.conj() * r[k];
        }
        if jhj < 1e-300 {
            break;
        }
        w -= jhr / jhj;
        if r.iter().map(|z| z.norm()).sum::<f64>() < 1e-15 {
            break;
        }
    }
    w
}

fn mat_residual(a: &Mat2, b: &Mat2) -> Vec<Complex64> {
    (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| a.at(i, j) - b.at(i, j))
        .collect()
}

/// The fixed conjugator applied to all fixtures so that no eigenline aligns
/// with a coordinate axis.
fn fixture_conjugator() -> Mat2 {
    let a = c(1.1, 0.3);
    let b = c(0.4, -0.2);
    let cc = c(-0.3, 0.5);
    let d = (c(1.0, 0.0) + b * cc) / a;
    Mat2::new(a, b, cc, d)
}

fn conjugate_all(mats: &mut [Mat2], h: &Mat2) {
    let hinv = h.inverse();
    for g in mats.iter_mut() {
        *g = hinv.mul(g).mul(h);
    }
}

/// Boundary-parabolic representation of the figure-eight diagram.
///
/// Arc order (as produced by [`OpenDiagram::arcs`]): the boundary arc
/// {bout, bin, t1}, then {t2, t3}, {t4, t5}, {t6, t7}.  The two free
/// parabolic generators color the boundary arc and {t4, t5}; the remaining
/// relations pin the lower-triangular parameter w, which the solver finds at
/// w ≈ e^{2πi/3}.
pub fn figure8_parabolic_rep() -> RepDoc {
    let d = builtin("figure8").expect("builtin figure8");
    let m = c(1.0, 0.0);
    let ga = Mat2::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
    let gc_of = |w: Complex64| Mat2::new(c(1.0, 0.0), c(0.0, 0.0), w, c(1.0, 0.0));
    // Relations: B = A ⊳ C, D = C ⊳ A hold by construction; the constraint is
    // C = B ⊳̄ D (and A = D ⊳̄ B follows).
    let residual = |w: Complex64| -> Vec<Complex64> {
        let gc = gc_of(w);
        let gb = gc.inverse().mul(&ga).mul(&gc);
        let gd = ga.inverse().mul(&gc).mul(&ga);
        let lhs = gd.mul(&gb).mul(&gd.inverse());
        mat_residual(&lhs, &gc)
    };
    let w = gauss_newton_1var(c(-0.5, 0.8), residual, 60);
    let gc = gc_of(w);
    let gb = gc.inverse().mul(&ga).mul(&gc);
    let gd = ga.inverse().mul(&gc).mul(&ga);

    let mut mats = [ga, gb, gc, gd];
    conjugate_all(&mut mats, &fixture_conjugator());
    build_rep_doc(&d, "figure8-parabolic", m, &mats, [c(0.62, 0.21), c(1.13, -0.37)])
}

/// Irreducible trefoil representation with meridian eigenvalue m = 1.2 + 0.3i.
///
/// Arc order: {t5, bout, bin}, {t1, t2}, {t3, t4}.  The generators are the
/// boundary arc (upper triangular) and {t3, t4} (lower triangular); the
/// braid-type relations fix the off-diagonal parameter.
pub fn trefoil_generic_rep() -> RepDoc {
    trefoil_rep_with_m(c(1.2, 0.3)).expect("reference meridian solves")
}

/// Trefoil representation with an arbitrary meridian eigenvalue, when the
/// relation solve converges.
pub fn trefoil_rep_with_m(m: Complex64) -> Option<RepDoc> {
    let d = builtin("trefoil").expect("builtin trefoil");
    let p = 1.0 / m;
    let ga = Mat2::new(p, c(1.0, 0.0), c(0.0, 0.0), m);
    let gc_of = |u: Complex64| Mat2::new(p, c(0.0, 0.0), u, m);
    // B = A ⊳ C by construction at c0; the constraint is A = C ⊳ B (c1);
    // C = B ⊳ A (c2) then follows.
    let residual = |u: Complex64| -> Vec<Complex64> {
        let gc = gc_of(u);
        let gb = gc.inverse().mul(&ga).mul(&gc);
        let lhs = gb.inverse().mul(&gc).mul(&gb);
        mat_residual(&lhs, &ga)
    };
    let u = gauss_newton_1var(c(-1.1, 0.4), residual, 80);
    if residual(u).iter().map(|z| z.norm()).sum::<f64>() > 1e-10 {
        return None;
    }
    let gc = gc_of(u);
    let gb = gc.inverse().mul(&ga).mul(&gc);

    let mut mats = [ga, gb, gc];
    conjugate_all(&mut mats, &fixture_conjugator());
    Some(build_rep_doc(
        &d,
        "trefoil-generic",
        m,
        &mats,
        [c(0.83, -0.14), c(0.41, 0.52)],
    ))
}

/// Assemble a RepDoc from per-arc matrices in diagram arc order, normalizing
/// the shadow so the boundary segment parameter is 1.
fn build_rep_doc(
    d: &OpenDiagram,
    name: &str,
    m: Complex64,
    mats: &[Mat2],
    u0_seed: [Complex64; 2],
) -> RepDoc {
    let tol = Tolerances::default();
    let arcs = d.arcs();
    assert_eq!(arcs.len(), mats.len());
    let colors: Vec<DecoratedMatrix> = mats
        .iter()
        .map(|g| DecoratedMatrix::new(*g, left_eigenvector(g, m), m))
        .collect();
    let coloring: SegmentColoring =
        expand_arc_coloring(d, &colors, &tol).expect("fixture relations hold");
    let shadow =
        propagate_shadow(d, &coloring, u0_seed, None, &tol).expect("fixture shadow propagates");
    // Push the shape parameters as far from the unit circle as a modest
    // gauge search can manage; this keeps the state-integral contour away
    // from the dilogarithm poles.
    let (shadow, report) =
        crate::coloring::gauge_search_maximize_margin(&shadow, d, &tol, 2024, 200);
    assert!(
        report.worst_margin > tol.unit_circle_margin,
        "fixture shapes stuck near the unit circle (margin {:.4})",
        report.worst_margin
    );
    let shadow = normalize(&shadow, d, &tol).expect("fixture normalizes");
    let params = parameters(&shadow, d, &tol);
    assert!(
        params.admissible,
        "fixture parameters inadmissible: {:?}",
        params.offenders
    );

    let arc_docs: Vec<ArcDoc> = arcs
        .iter()
        .zip(&colors)
        .map(|(arc, dm)| ArcDoc {
            segments: arc.iter().map(|s| d.seg_name(*s).to_string()).collect(),
            g: dm.g,
            v: dm.v,
        })
        .collect();
    RepDoc {
        name: name.into(),
        m: Cpx(m),
        arcs: arc_docs,
        u0: Some([
            Cpx(shadow.u[shadow.base_region][0]),
            Cpx(shadow.u[shadow.base_region][1]),
        ]),
        base_region: Some(shadow.base_region),
    }
}

/// Which segments of the diagram belong to which arc, for error messages and
/// fixture docs.
pub fn arc_names(d: &OpenDiagram) -> Vec<Vec<String>> {
    d.arcs()
        .iter()
        .map(|arc| arc.iter().map(|s| d.seg_name(*s).to_string()).collect())
        .collect()
}

/// True if `seg` lies on the given arc.
pub fn arc_contains(arc: &[SegRef], seg: SegRef) -> bool {
    arc.contains(&seg)
}
