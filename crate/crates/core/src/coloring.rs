//! Decorated SL₂(ℂ) colorings of open diagrams, shadow colorings on regions,
//! gauge transformations, and extraction of the region/segment parameters
//! (a_j, b_i).
//!
//! A decorated matrix is a pair (g, [v]) of g ∈ SL₂(ℂ) and a row eigenline
//! with v·g = m⁻¹·v; the inverse in the eigenvalue is deliberate.  Colorings
//! assign decorated matrices to segments, constant along over-strands and
//! transformed by the binary operation [`qn`] / [`qn_inv`] at under-passes.
//! A shadow coloring additionally hangs a column vector u_j on every region,
//! subject to u_below = g · u_above across each segment.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{compute_regions, OpenDiagram, Regions, Role, SegRef};
use crate::linalg::{projective_distance, Mat2};
use crate::util::Cpx;
use crate::Tolerances;

#[derive(Debug, Error)]
pub enum ColoringError {
    #[error("matrix is not decorated: |v·g − m⁻¹·v| = {0:.3e}")]
    NotDecorated(f64),
    #[error("determinant differs from 1 by {0:.3e}")]
    NotUnimodular(f64),
    #[error("crossing relation violated at crossing `{crossing}`: residual {residual:.3e}")]
    CrossingRelation { crossing: String, residual: f64 },
    #[error("arc document does not match the diagram's arc structure: {0}")]
    ArcMismatch(String),
    #[error("shadow cycle closure failed across segment `{segment}`: residual {residual:.3e}")]
    CycleClosure { segment: String, residual: f64 },
    #[error("base vector u0 must be nonzero")]
    ZeroBaseVector,
    #[error("boundary segment parameter is {0} (cannot normalize)")]
    BadBoundaryParameter(Complex64),
    #[error("representation document invalid: {0}")]
    BadDocument(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A matrix g ∈ SL₂(ℂ) with a distinguished row eigenline [v] and the
/// distinguished eigenvalue m defined by v·g = m⁻¹·v.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecoratedMatrix {
    pub g: Mat2,
    pub v: [Cpx; 2],
    #[serde(with = "crate::util::cpx_serde")]
    pub m: Complex64,
}

impl DecoratedMatrix {
    pub fn new(g: Mat2, v: [Complex64; 2], m: Complex64) -> Self {
        DecoratedMatrix {
            g,
            v: [Cpx(v[0]), Cpx(v[1])],
            m,
        }
    }

    pub fn v(&self) -> [Complex64; 2] {
        [self.v[0].0, self.v[1].0]
    }

    /// Residual of the decoration identity v·g = m⁻¹·v, relative to ‖v‖.
    pub fn decoration_residual(&self) -> f64 {
        let v = self.v();
        let vg = self.g.row_mul(v);
        let minv = 1.0 / self.m;
        let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        ((vg[0] - minv * v[0]).norm_sqr() + (vg[1] - minv * v[1]).norm_sqr()).sqrt() / norm
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<(), ColoringError> {
        let dd = (self.g.det() - Complex64::new(1.0, 0.0)).norm();
        if dd > tol.residual.max(1e-9) {
            return Err(ColoringError::NotUnimodular(dd));
        }
        let r = self.decoration_residual();
        if r > tol.residual.max(1e-9) {
            return Err(ColoringError::NotDecorated(r));
        }
        Ok(())
    }
}

/// The binary operation on decorated matrices:
/// (g,[v]) ⊳ (h,[w]) = (h⁻¹ g h, [v·h]).
pub fn qn(x: &DecoratedMatrix, y: &DecoratedMatrix) -> DecoratedMatrix {
    let h = y.g;
    let hinv = h.inverse();
    DecoratedMatrix::new(hinv.mul(&x.g).mul(&h), h.row_mul(x.v()), x.m)
}

/// Two-sided inverse of [`qn`]: (g,[v]) ⊳̄ (h,[w]) = (h g h⁻¹, [v·h⁻¹]).
pub fn qn_inv(x: &DecoratedMatrix, y: &DecoratedMatrix) -> DecoratedMatrix {
    let h = y.g;
    let hinv = h.inverse();
    DecoratedMatrix::new(h.mul(&x.g).mul(&hinv), hinv.row_mul(x.v()), x.m)
}

/// Decorated matrices on every segment of an open diagram, with the two
/// boundary segments sharing one matrix.
#[derive(Debug, Clone)]
pub struct SegmentColoring {
    /// One decorated matrix per internal segment.
    pub colors: Vec<DecoratedMatrix>,
    /// The shared boundary matrix.
    pub boundary: DecoratedMatrix,
}

impl SegmentColoring {
    pub fn color(&self, seg: SegRef) -> &DecoratedMatrix {
        match seg {
            SegRef::Internal(i) => &self.colors[i],
            _ => &self.boundary,
        }
    }

    /// The meridian eigenvalue shared by all segments.
    pub fn meridian(&self) -> Complex64 {
        self.boundary.m
    }
}

fn relation_residual(d: &OpenDiagram, c: &SegmentColoring, ci: usize) -> f64 {
    let site = &d.crossings[ci];
    let (g1, g2, g1p, g2p) = (
        c.color(site.slot(Role::S1)),
        c.color(site.slot(Role::S2)),
        c.color(site.slot(Role::S1p)),
        c.color(site.slot(Role::S2p)),
    );
    if site.sign > 0 {
        // Over strand s1 → s1' unchanged; s2' = s2 ⊳ s1.
        let expect = qn(g2, g1);
        g1.g.max_abs_diff(&g1p.g)
            + expect.g.max_abs_diff(&g2p.g)
            + projective_distance(g1.v(), g1p.v())
            + projective_distance(expect.v(), g2p.v())
    } else {
        // Over strand s2 → s2' unchanged; s1' = s1 ⊳̄ s2.
        let expect = qn_inv(g1, g2);
        g2.g.max_abs_diff(&g2p.g)
            + expect.g.max_abs_diff(&g1p.g)
            + projective_distance(g2.v(), g2p.v())
            + projective_distance(expect.v(), g1p.v())
    }
}

/// Largest crossing-relation residual of a segment coloring (matrix entry
/// differences plus projective eigenline defects, summed per crossing).
pub fn max_relation_residual(d: &OpenDiagram, c: &SegmentColoring) -> f64 {
    (0..d.crossings.len())
        .map(|ci| relation_residual(d, c, ci))
        .fold(0.0, f64::max)
}

/// Expand a per-arc assignment of decorated matrices into a segment coloring,
/// verifying every crossing relation and the boundary match.
///
/// `arc_colors` is indexed like [`OpenDiagram::arcs`]: entry 0 colors the arc
/// containing the boundary segments.
pub fn expand_arc_coloring(
    d: &OpenDiagram,
    arc_colors: &[DecoratedMatrix],
    tol: &Tolerances,
) -> Result<SegmentColoring, ColoringError> {
    let arcs = d.arcs();
    if arcs.len() != arc_colors.len() {
        return Err(ColoringError::ArcMismatch(format!(
            "diagram has {} arcs, document provides {}",
            arcs.len(),
            arc_colors.len()
        )));
    }
    for dm in arc_colors {
        dm.validate(tol)?;
    }
    let mut colors = vec![None; d.num_internal()];
    let mut boundary = None;
    for (arc, dm) in arcs.iter().zip(arc_colors) {
        for seg in arc {
            match seg {
                SegRef::Internal(i) => colors[*i] = Some(*dm),
                _ => boundary = Some(*dm),
            }
        }
    }
    let coloring = SegmentColoring {
        colors: colors
            .into_iter()
            .map(|c| c.expect("arcs cover all segments"))
            .collect(),
        boundary: boundary.expect("arc 0 contains the boundary"),
    };
    for ci in 0..d.crossings.len() {
        let r = relation_residual(d, &coloring, ci);
        if r > tol.residual * 1e3 {
            return Err(ColoringError::CrossingRelation {
                crossing: d.crossings[ci].id.clone(),
                residual: r,
            });
        }
    }
    Ok(coloring)
}

/// A shadow coloring: a segment coloring plus column vectors on the regions
/// of the closed diagram, obeying u_below = g · u_above across each segment.
#[derive(Debug, Clone)]
pub struct ShadowColoring {
    pub base: SegmentColoring,
    pub regions: Regions,
    pub u: Vec<[Complex64; 2]>,
    pub base_region: usize,
}

/// Propagate u0 from `base_region` to all regions along the dual graph and
/// verify every cycle closes.
pub fn propagate_shadow(
    d: &OpenDiagram,
    c: &SegmentColoring,
    u0: [Complex64; 2],
    base_region: Option<usize>,
    tol: &Tolerances,
) -> Result<ShadowColoring, ColoringError> {
    if u0[0].norm() + u0[1].norm() == 0.0 {
        return Err(ColoringError::ZeroBaseVector);
    }
    let regions = compute_regions(d).expect("diagram was validated");
    let base_region = base_region.unwrap_or(regions.boundary_above);

    // Dual edges: (above, below, g) for every segment including the closure.
    let mut edges: Vec<(usize, usize, Mat2, String)> = Vec::new();
    for i in 0..d.num_internal() {
        edges.push((
            regions.above[i],
            regions.below[i],
            c.colors[i].g,
            d.segments[i].clone(),
        ));
    }
    edges.push((
        regions.boundary_above,
        regions.boundary_below,
        c.boundary.g,
        "boundary".to_string(),
    ));

    let n = regions.count();
    let mut u: Vec<Option<[Complex64; 2]>> = vec![None; n];
    u[base_region] = Some(u0);
    let mut queue = std::collections::VecDeque::from([base_region]);
    while let Some(r) = queue.pop_front() {
        let ur = u[r].unwrap();
        for (above, below, g, _) in &edges {
            if *above == r && u[*below].is_none() {
                u[*below] = Some(g.col_mul(ur));
                queue.push_back(*below);
            } else if *below == r && u[*above].is_none() {
                u[*above] = Some(g.inverse().col_mul(ur));
                queue.push_back(*above);
            }
        }
    }
    let u: Vec<[Complex64; 2]> = u
        .into_iter()
        .map(|x| x.expect("dual graph of a connected diagram is connected"))
        .collect();

    // Cycle closure on every dual edge.
    let scale = u
        .iter()
        .map(|v| (v[0].norm_sqr() + v[1].norm_sqr()).sqrt())
        .fold(1.0f64, f64::max);
    for (above, below, g, name) in &edges {
        let expect = g.col_mul(u[*above]);
        let got = u[*below];
        let res = ((expect[0] - got[0]).norm_sqr() + (expect[1] - got[1]).norm_sqr()).sqrt();
        if res > tol.residual * 1e3 * scale {
            return Err(ColoringError::CycleClosure {
                segment: name.clone(),
                residual: res / scale,
            });
        }
    }

    Ok(ShadowColoring {
        base: c.clone(),
        regions,
        u,
        base_region,
    })
}

/// Region and segment parameters of a shadow coloring.
#[derive(Debug, Clone, Serialize)]
pub struct ParameterSet {
    /// a_j = e₁ᵀ u_j per region.
    pub a: Vec<Cpx>,
    /// b_i = −(v_i·e₂)/(v_i·u_{i↑}) per internal segment.
    pub b: Vec<Cpx>,
    /// Parameter of the (shared) boundary segment.
    pub b_boundary: Cpx,
    /// Meridian eigenvalue of the coloring.
    pub m: Cpx,
    pub admissible: bool,
    /// Names of parameters that vanish or blow up.
    pub offenders: Vec<String>,
}

impl ParameterSet {
    pub fn b_values(&self) -> Vec<Complex64> {
        self.b.iter().map(|c| c.0).collect()
    }
}

fn segment_parameter(v: [Complex64; 2], u_above: [Complex64; 2]) -> Complex64 {
    let denom = v[0] * u_above[0] + v[1] * u_above[1];
    -v[1] / denom
}

/// Extract (a_j, b_i) from a shadow coloring.  Division by a vanishing
/// v·u_{i↑} is reported through `admissible` / `offenders`, not an error.
pub fn parameters(s: &ShadowColoring, d: &OpenDiagram, tol: &Tolerances) -> ParameterSet {
    let mut offenders = Vec::new();
    let a: Vec<Cpx> = s.u.iter().map(|u| Cpx(u[0])).collect();
    for (j, aj) in a.iter().enumerate() {
        if aj.0.norm() < tol.residual {
            offenders.push(format!("a[region {j}] = 0"));
        }
    }
    let mut b = Vec::with_capacity(d.num_internal());
    for i in 0..d.num_internal() {
        let v = s.base.colors[i].v();
        let above = s.regions.above[i];
        let denom = v[0] * s.u[above][0] + v[1] * s.u[above][1];
        if denom.norm() < tol.residual {
            offenders.push(format!("b[{}] undefined (v·u = 0)", d.segments[i]));
            b.push(Cpx(Complex64::new(f64::INFINITY, 0.0)));
            continue;
        }
        let bi = segment_parameter(v, s.u[above]);
        if bi.norm() < tol.residual {
            offenders.push(format!("b[{}] = 0", d.segments[i]));
        }
        b.push(Cpx(bi));
    }
    let vb = s.base.boundary.v();
    let ub = s.u[s.regions.boundary_above];
    let denom = vb[0] * ub[0] + vb[1] * ub[1];
    let b_boundary = if denom.norm() < tol.residual {
        offenders.push("b[boundary] undefined (v·u = 0)".to_string());
        Cpx(Complex64::new(f64::INFINITY, 0.0))
    } else {
        let v = segment_parameter(vb, ub);
        if v.norm() < tol.residual {
            offenders.push("b[boundary] = 0".to_string());
        }
        Cpx(v)
    };
    ParameterSet {
        a,
        b,
        b_boundary,
        m: Cpx(s.base.meridian()),
        admissible: offenders.is_empty(),
        offenders,
    }
}

/// Gauge transformation kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaugeKind {
    A,
    B,
}

/// Apply a gauge transformation by h ∈ SL₂(ℂ).
///
/// Type A conjugates every segment color, i ↦ (h⁻¹ g_i h, [v_i·h]), and maps
/// every region vector to h⁻¹·u_j.  Type B keeps the segment colors and
/// replaces the base vector by h⁻¹·u₀, re-propagating the shadow (a pointwise
/// h⁻¹ on all regions would break the shadow rule for non-central h).
pub fn gauge(
    s: &ShadowColoring,
    d: &OpenDiagram,
    kind: GaugeKind,
    h: &Mat2,
    tol: &Tolerances,
) -> Result<ShadowColoring, ColoringError> {
    let det_err = (h.det() - Complex64::new(1.0, 0.0)).norm();
    if det_err > 1e-9 {
        return Err(ColoringError::NotUnimodular(det_err));
    }
    let hinv = h.inverse();
    match kind {
        GaugeKind::A => {
            let transform = |dm: &DecoratedMatrix| {
                DecoratedMatrix::new(hinv.mul(&dm.g).mul(h), h.row_mul(dm.v()), dm.m)
            };
            let base = SegmentColoring {
                colors: s.base.colors.iter().map(transform).collect(),
                boundary: transform(&s.base.boundary),
            };
            let u0 = hinv.col_mul(s.u[s.base_region]);
            propagate_shadow(d, &base, u0, Some(s.base_region), tol)
        }
        GaugeKind::B => {
            let u0 = hinv.col_mul(s.u[s.base_region]);
            propagate_shadow(d, &s.base, u0, Some(s.base_region), tol)
        }
    }
}

/// Rescale the region vectors by the scalar c = b_boundary so the boundary
/// segment parameter becomes 1.
pub fn normalize(
    s: &ShadowColoring,
    d: &OpenDiagram,
    tol: &Tolerances,
) -> Result<ShadowColoring, ColoringError> {
    let params = parameters(s, d, tol);
    let c = params.b_boundary.0;
    if !c.is_finite() || c.norm() < tol.residual {
        return Err(ColoringError::BadBoundaryParameter(c));
    }
    let mut out = s.clone();
    for u in &mut out.u {
        u[0] *= c;
        u[1] *= c;
    }
    Ok(out)
}

/// Per-crossing pinch report: a crossing is pinched when its two incoming
/// eigenlines coincide projectively.
#[derive(Debug, Clone, Serialize)]
pub struct PinchReport {
    pub crossing: String,
    /// |v1 ∧ v2| / (‖v1‖‖v2‖) for the incoming segments.
    pub alignment: f64,
    pub pinched: bool,
}

pub fn is_pinched(d: &OpenDiagram, c: &SegmentColoring, tol: &Tolerances) -> Vec<PinchReport> {
    d.crossings
        .iter()
        .map(|site| {
            let v1 = c.color(site.slot(Role::S1)).v();
            let v2 = c.color(site.slot(Role::S2)).v();
            let alignment = projective_distance(v1, v2);
            PinchReport {
                crossing: site.id.clone(),
                alignment,
                pinched: alignment < tol.projective,
            }
        })
        .collect()
}

/// Report on unit-circle avoidance of a set of shape parameters.
#[derive(Debug, Clone, Serialize)]
pub struct UnitCircleReport {
    /// min over shapes of | |z| − 1 |.
    pub worst_margin: f64,
    pub avoids: bool,
    pub required_margin: f64,
}

/// True iff every |z| differs from 1 by more than the configured margin.
pub fn avoids_unit_circle(shapes: &[Complex64], tol: &Tolerances) -> UnitCircleReport {
    let worst = shapes
        .iter()
        .map(|z| (z.norm() - 1.0).abs())
        .fold(f64::INFINITY, f64::min);
    UnitCircleReport {
        worst_margin: worst,
        avoids: worst > tol.unit_circle_margin,
        required_margin: tol.unit_circle_margin,
    }
}

/// Search for a type-B gauge that pushes all shape parameters off the unit
/// circle, maximizing the minimal margin over up to `trials` seeded draws.
/// Returns the best coloring found and its report.
pub fn gauge_search_unit_circle(
    s: &ShadowColoring,
    d: &OpenDiagram,
    tol: &Tolerances,
    seed: u64,
    trials: usize,
) -> Result<(ShadowColoring, UnitCircleReport), ColoringError> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes_of = |sc: &ShadowColoring| -> Vec<Complex64> {
        let p = parameters(sc, d, tol);
        crate::geometry::shape_parameters(d, &p.b_values(), p.b_boundary.0, p.m.0)
            .map(|sp| sp.all_values())
            .unwrap_or_default()
    };
    let mut best = s.clone();
    let mut best_report = avoids_unit_circle(&shapes_of(s), tol);
    for _ in 0..trials {
        if best_report.avoids {
            break;
        }
        let h = random_sl2(&mut rng);
        let candidate = match gauge(s, d, GaugeKind::B, &h, tol) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let shapes = shapes_of(&candidate);
        if shapes.is_empty() {
            continue;
        }
        let report = avoids_unit_circle(&shapes, tol);
        if report.worst_margin > best_report.worst_margin {
            best = candidate;
            best_report = report;
        }
    }
    Ok((best, best_report))
}

/// Like [`gauge_search_unit_circle`] but never stops early: scans all
/// trials and keeps the gauge with the largest margin.  Used when building
/// fixtures, where a comfortable margin keeps the integrand poles far from
/// the real contour.
pub fn gauge_search_maximize_margin(
    s: &ShadowColoring,
    d: &OpenDiagram,
    tol: &Tolerances,
    seed: u64,
    trials: usize,
) -> (ShadowColoring, UnitCircleReport) {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes_of = |sc: &ShadowColoring| -> Vec<Complex64> {
        let p = parameters(sc, d, tol);
        crate::geometry::shape_parameters(d, &p.b_values(), p.b_boundary.0, p.m.0)
            .map(|sp| sp.all_values())
            .unwrap_or_default()
    };
    let mut best = s.clone();
    let mut best_report = avoids_unit_circle(&shapes_of(s), tol);
    for _ in 0..trials {
        let h = random_sl2(&mut rng);
        let candidate = match gauge(s, d, GaugeKind::B, &h, tol) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let shapes = shapes_of(&candidate);
        if shapes.is_empty() {
            continue;
        }
        let report = avoids_unit_circle(&shapes, tol);
        if report.worst_margin > best_report.worst_margin {
            best = candidate;
            best_report = report;
        }
    }
    (best, best_report)
}

/// A random SL₂(ℂ) matrix with entries of moderate size.
pub fn random_sl2<R: Rng>(rng: &mut R) -> Mat2 {
    loop {
        let z = |rng: &mut R| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let a = z(rng) + Complex64::new(1.0, 0.0);
        let b = z(rng);
        let c = z(rng);
        if a.norm() < 0.2 {
            continue;
        }
        let dd = (Complex64::new(1.0, 0.0) + b * c) / a;
        return Mat2::new(a, b, c, dd);
    }
}

// ---------------------------------------------------------------------------
// Representation documents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArcDoc {
    /// Segment names this arc consists of (boundary names included).
    pub segments: Vec<String>,
    pub g: Mat2,
    pub v: [Cpx; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepDoc {
    pub name: String,
    /// Meridian eigenvalue distinguished by the decoration.
    pub m: Cpx,
    pub arcs: Vec<ArcDoc>,
    #[serde(default)]
    pub u0: Option<[Cpx; 2]>,
    #[serde(default)]
    pub base_region: Option<usize>,
}

impl RepDoc {
    pub fn from_json(text: &str) -> Result<Self, ColoringError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rep document serializes")
    }
}

/// Match the document's arcs against the diagram's arc structure and expand
/// into a validated segment coloring.
pub fn load_rep(
    d: &OpenDiagram,
    doc: &RepDoc,
    tol: &Tolerances,
) -> Result<SegmentColoring, ColoringError> {
    let arcs = d.arcs();
    let mut ordered: Vec<Option<DecoratedMatrix>> = vec![None; arcs.len()];
    for arc_doc in &doc.arcs {
        let mut names: Vec<&str> = arc_doc.segments.iter().map(|s| s.as_str()).collect();
        names.sort_unstable();
        let pos = arcs.iter().position(|arc| {
            let mut mine: Vec<&str> = arc.iter().map(|s| d.seg_name(*s)).collect();
            mine.sort_unstable();
            mine == names
        });
        let pos = pos.ok_or_else(|| {
            ColoringError::ArcMismatch(format!("no diagram arc matches {:?}", arc_doc.segments))
        })?;
        if ordered[pos].is_some() {
            return Err(ColoringError::ArcMismatch(format!(
                "arc {:?} specified twice",
                arc_doc.segments
            )));
        }
        ordered[pos] = Some(DecoratedMatrix::new(
            arc_doc.g,
            [arc_doc.v[0].0, arc_doc.v[1].0],
            doc.m.0,
        ));
    }
    let colors: Vec<DecoratedMatrix> = ordered
        .into_iter()
        .enumerate()
        .map(|(k, c)| c.ok_or_else(|| ColoringError::ArcMismatch(format!("arc {k} missing"))))
        .collect::<Result<_, _>>()?;
    expand_arc_coloring(d, &colors, tol)
}

/// Build the shadow coloring a representation document describes, using its
/// u0 when present and (1, 0)ᵀ otherwise.
pub fn load_shadow(
    d: &OpenDiagram,
    doc: &RepDoc,
    tol: &Tolerances,
) -> Result<ShadowColoring, ColoringError> {
    let base = load_rep(d, doc, tol)?;
    let u0 = doc
        .u0
        .map(|u| [u[0].0, u[1].0])
        .unwrap_or([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    propagate_shadow(d, &base, u0, doc.base_region, tol)
}
