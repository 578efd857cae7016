//! Open knot diagrams: crossings with role-labelled segments, turnbacks with
//! shift signs, boundary segments, and the planar region structure of the
//! closed diagram.
//!
//! A diagram document is purely combinatorial.  Each crossing declares which
//! segment plays which of the four roles (s1, s2, s1', s2'): the through
//! strands are s1→s1' and s2→s2', the strand s1→s1' is the over strand at a
//! positive crossing and s2→s2' at a negative one.  Turnbacks record the
//! U-turns of the strand; the two marked kinds carry the shift sign σ = ±1
//! that feeds the action builder, the two unmarked kinds have σ = 0.
//! Region combinatorics come from a rotation system (counterclockwise dart
//! order per crossing) and are validated with the Euler formula.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagramError {
    #[error("segment `{0}` is used with inconsistent orientation or multiplicity: {1}")]
    BadIncidence(String, String),
    #[error("diagram has no crossings")]
    ZeroCrossings,
    #[error("closure of the diagram is not a single knot: {0}")]
    NotAKnot(String),
    #[error("unknown builtin diagram `{0}`")]
    UnknownBuiltin(String),
    #[error("rotation system invalid at crossing `{0}`: {1}")]
    BadRotation(String, String),
    #[error("Euler characteristic check failed: V={v}, E={e}, F={f}")]
    EulerCheckFailed { v: usize, e: usize, f: usize },
    #[error("turnback shift signs do not cancel along the strand (sum = {0})")]
    UnbalancedTurnbacks(i64),
    #[error("turnback references unknown or boundary segment `{0}`")]
    BadTurnback(String),
    #[error("boundary declaration invalid: {0}")]
    BadBoundary(String),
    #[error("diagram document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Reference to a segment from a crossing slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegRef {
    BoundaryIn,
    BoundaryOut,
    Internal(usize),
}

/// The four crossing roles, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    S1 = 0,
    S2 = 1,
    S1p = 2,
    S2p = 3,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::S1, Role::S2, Role::S1p, Role::S2p];

    fn parse(s: &str) -> Option<Role> {
        match s {
            "s1" => Some(Role::S1),
            "s2" => Some(Role::S2),
            "s1p" => Some(Role::S1p),
            "s2p" => Some(Role::S2p),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Role::S1 => "s1",
            Role::S2 => "s2",
            Role::S1p => "s1p",
            Role::S2p => "s2p",
        }
    }

    pub fn is_input(self) -> bool {
        matches!(self, Role::S1 | Role::S2)
    }
}

/// The four turnback kinds.  σ is keyed to the kind: upward U-turns carry no
/// shift, downward ones carry ∓1 by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnbackKind {
    CupPos,
    CupNeg,
    CapPos,
    CapNeg,
}

impl TurnbackKind {
    pub fn sigma(self) -> i64 {
        match self {
            TurnbackKind::CupPos | TurnbackKind::CupNeg => 0,
            TurnbackKind::CapPos => 1,
            TurnbackKind::CapNeg => -1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrossingSite {
    pub id: String,
    /// Crossing sign ε ∈ {+1, −1}.
    pub sign: i8,
    /// Segments in roles [s1, s2, s1', s2'].
    pub slots: [SegRef; 4],
    /// Counterclockwise dart order around the crossing.
    pub rotation: [Role; 4],
}

impl CrossingSite {
    pub fn slot(&self, role: Role) -> SegRef {
        self.slots[role as usize]
    }
}

#[derive(Debug, Clone)]
pub struct Turnback {
    pub kind: TurnbackKind,
    /// Internal segment the turnback lies on.
    pub on: usize,
}

/// One crossing passage of the knot traversal.
#[derive(Debug, Clone, Copy)]
pub struct Visit {
    pub crossing: usize,
    /// True when the strand enters through s1 (and leaves through s1'),
    /// false for the s2 → s2' passage.
    pub enters_slot1: bool,
    /// Accumulated turnback shift sign at this passage; the quantum action
    /// shifts both engaged slots by `offset_sigma · (1 − 1/N)`, the classical
    /// one by `offset_sigma`.
    pub offset_sigma: i64,
}

#[derive(Debug, Clone)]
pub struct OpenDiagram {
    pub name: String,
    /// Internal segment names in document order; indices into this vector are
    /// the segment indices used everywhere else.
    pub segments: Vec<String>,
    pub boundary_in: String,
    pub boundary_out: String,
    pub crossings: Vec<CrossingSite>,
    pub turnbacks: Vec<Turnback>,
    /// Knot traversal from the incoming to the outgoing boundary.
    pub traversal: Vec<Visit>,
}

impl OpenDiagram {
    pub fn crossing_number(&self) -> usize {
        self.crossings.len()
    }

    pub fn num_internal(&self) -> usize {
        self.segments.len()
    }

    pub fn segment_index(&self, name: &str) -> Option<usize> {
        self.segments.iter().position(|s| s == name)
    }

    pub fn seg_name(&self, r: SegRef) -> &str {
        match r {
            SegRef::BoundaryIn => &self.boundary_in,
            SegRef::BoundaryOut => &self.boundary_out,
            SegRef::Internal(i) => &self.segments[i],
        }
    }

    /// Total turnback shift sign carried by segment `i`.
    pub fn sigma_sum(&self, i: usize) -> i64 {
        self.turnbacks
            .iter()
            .filter(|t| t.on == i)
            .map(|t| t.kind.sigma())
            .sum()
    }

    /// The slot occupied by `seg` at its input end (crossing, role).
    pub fn input_slot(&self, seg: SegRef) -> (usize, Role) {
        self.find_slot(seg, true)
    }

    /// The slot occupied by `seg` at its output end (crossing, role).
    pub fn output_slot(&self, seg: SegRef) -> (usize, Role) {
        self.find_slot(seg, false)
    }

    fn find_slot(&self, seg: SegRef, input: bool) -> (usize, Role) {
        for (ci, c) in self.crossings.iter().enumerate() {
            for role in Role::ALL {
                if role.is_input() == input && c.slot(role) == seg {
                    return (ci, role);
                }
            }
        }
        unreachable!("validated diagram: every segment has both slots");
    }

    /// Maximal over-strand arcs in traversal order.  Each arc is the list of
    /// segments it consists of; the arc containing the boundary segments has
    /// `BoundaryOut` spliced in front of `BoundaryIn` by the closure.
    pub fn arcs(&self) -> Vec<Vec<SegRef>> {
        let path = self.segment_path();
        let mut arcs: Vec<Vec<SegRef>> = Vec::new();
        let mut current = vec![path[0]];
        for (k, visit) in self.traversal.iter().enumerate() {
            let sign = self.crossings[visit.crossing].sign;
            let goes_over = (sign > 0 && visit.enters_slot1) || (sign < 0 && !visit.enters_slot1);
            if !goes_over {
                arcs.push(std::mem::take(&mut current));
            }
            current.push(path[k + 1]);
        }
        arcs.push(current);
        // The closure joins the last arc (ending at BoundaryOut) to the first
        // (starting at BoundaryIn) without passing under any crossing.
        if arcs.len() > 1 {
            let last = arcs.pop().unwrap();
            let mut merged = last;
            merged.extend(arcs.remove(0));
            arcs.insert(0, merged);
        }
        arcs
    }

    /// The segments in knot order: BoundaryIn, internals, BoundaryOut.
    pub fn segment_path(&self) -> Vec<SegRef> {
        let mut path = vec![SegRef::BoundaryIn];
        for v in &self.traversal {
            let c = &self.crossings[v.crossing];
            let out = if v.enters_slot1 {
                c.slot(Role::S1p)
            } else {
                c.slot(Role::S2p)
            };
            path.push(out);
        }
        path
    }
}

// ---------------------------------------------------------------------------
// JSON document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossingDoc {
    #[serde(default)]
    pub id: Option<String>,
    pub sign: i8,
    pub s1: String,
    pub s2: String,
    pub s1p: String,
    pub s2p: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TurnbackDoc {
    pub kind: TurnbackKind,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryDoc {
    #[serde(rename = "in")]
    pub input: String,
    #[serde(rename = "out")]
    pub output: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagramDoc {
    pub name: String,
    pub crossings: Vec<CrossingDoc>,
    #[serde(default)]
    pub turnbacks: Vec<TurnbackDoc>,
    pub boundary: BoundaryDoc,
    /// Crossing id → counterclockwise dart order, as role names
    /// ("s1", "s2", "s1p", "s2p").
    pub rotation: BTreeMap<String, Vec<String>>,
}

impl DiagramDoc {
    pub fn from_json(text: &str) -> Result<Self, DiagramError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagram document serializes")
    }
}

impl OpenDiagram {
    /// Re-serialize the diagram as a document (round-trips through
    /// [`parse_diagram`]).
    pub fn to_document(&self) -> DiagramDoc {
        DiagramDoc {
            name: self.name.clone(),
            crossings: self
                .crossings
                .iter()
                .map(|c| CrossingDoc {
                    id: Some(c.id.clone()),
                    sign: c.sign,
                    s1: self.seg_name(c.slot(Role::S1)).to_string(),
                    s2: self.seg_name(c.slot(Role::S2)).to_string(),
                    s1p: self.seg_name(c.slot(Role::S1p)).to_string(),
                    s2p: self.seg_name(c.slot(Role::S2p)).to_string(),
                })
                .collect(),
            turnbacks: self
                .turnbacks
                .iter()
                .map(|t| TurnbackDoc {
                    kind: t.kind,
                    from: self.segments[t.on].clone(),
                    to: self.segments[t.on].clone(),
                })
                .collect(),
            boundary: BoundaryDoc {
                input: self.boundary_in.clone(),
                output: self.boundary_out.clone(),
            },
            rotation: self
                .crossings
                .iter()
                .map(|c| {
                    (
                        c.id.clone(),
                        c.rotation.iter().map(|r| r.name().to_string()).collect(),
                    )
                })
                .collect(),
        }
    }
}

/// Parse and fully validate a diagram document.
pub fn parse_diagram(doc: &DiagramDoc) -> Result<OpenDiagram, DiagramError> {
    if doc.crossings.is_empty() {
        return Err(DiagramError::ZeroCrossings);
    }
    let b_in = doc.boundary.input.clone();
    let b_out = doc.boundary.output.clone();
    if b_in == b_out {
        return Err(DiagramError::BadBoundary(
            "incoming and outgoing boundary segments must have distinct names".into(),
        ));
    }

    // Collect internal segments in document order of first appearance.
    let mut segments: Vec<String> = Vec::new();
    for c in &doc.crossings {
        for name in [&c.s1, &c.s2, &c.s1p, &c.s2p] {
            if *name != b_in && *name != b_out && !segments.contains(name) {
                segments.push(name.clone());
            }
        }
    }

    let seg_ref = |name: &str| -> SegRef {
        if name == b_in {
            SegRef::BoundaryIn
        } else if name == b_out {
            SegRef::BoundaryOut
        } else {
            SegRef::Internal(segments.iter().position(|s| s == name).unwrap())
        }
    };

    // Incidence counts: every internal segment once as input, once as output;
    // BoundaryIn once as input; BoundaryOut once as output.
    let mut in_count: BTreeMap<String, usize> = BTreeMap::new();
    let mut out_count: BTreeMap<String, usize> = BTreeMap::new();
    for c in &doc.crossings {
        *in_count.entry(c.s1.clone()).or_default() += 1;
        *in_count.entry(c.s2.clone()).or_default() += 1;
        *out_count.entry(c.s1p.clone()).or_default() += 1;
        *out_count.entry(c.s2p.clone()).or_default() += 1;
    }
    for s in &segments {
        let (i, o) = (
            in_count.get(s).copied().unwrap_or(0),
            out_count.get(s).copied().unwrap_or(0),
        );
        if i != 1 || o != 1 {
            return Err(DiagramError::BadIncidence(
                s.clone(),
                format!("appears {i} times as input and {o} times as output (need 1 and 1)"),
            ));
        }
    }
    if in_count.get(&b_in).copied().unwrap_or(0) != 1
        || out_count.get(&b_in).copied().unwrap_or(0) != 0
    {
        return Err(DiagramError::BadIncidence(
            b_in.clone(),
            "boundary-in must appear exactly once, as an input".into(),
        ));
    }
    if out_count.get(&b_out).copied().unwrap_or(0) != 1
        || in_count.get(&b_out).copied().unwrap_or(0) != 0
    {
        return Err(DiagramError::BadIncidence(
            b_out.clone(),
            "boundary-out must appear exactly once, as an output".into(),
        ));
    }

    // Turnbacks: on internal segments only; shift signs must cancel overall,
    // otherwise the outgoing boundary would carry a nonzero parameter shift.
    let mut turnbacks = Vec::new();
    for t in &doc.turnbacks {
        if t.from != t.to {
            return Err(DiagramError::BadTurnback(format!(
                "{} -> {} (a turnback lies on a single segment)",
                t.from, t.to
            )));
        }
        let idx = segments
            .iter()
            .position(|s| *s == t.from)
            .ok_or_else(|| DiagramError::BadTurnback(t.from.clone()))?;
        turnbacks.push(Turnback { kind: t.kind, on: idx });
    }
    let sigma_total: i64 = turnbacks.iter().map(|t| t.kind.sigma()).sum();
    if sigma_total != 0 {
        return Err(DiagramError::UnbalancedTurnbacks(sigma_total));
    }

    // Crossings with rotation systems.
    let mut crossings = Vec::new();
    for (ci, c) in doc.crossings.iter().enumerate() {
        let id = c.id.clone().unwrap_or_else(|| format!("c{ci}"));
        let rot_names = doc
            .rotation
            .get(&id)
            .ok_or_else(|| DiagramError::BadRotation(id.clone(), "missing rotation entry".into()))?;
        if rot_names.len() != 4 {
            return Err(DiagramError::BadRotation(id, "need exactly 4 darts".into()));
        }
        let mut rotation = [Role::S1; 4];
        let mut seen = [false; 4];
        for (k, rn) in rot_names.iter().enumerate() {
            let role = Role::parse(rn)
                .ok_or_else(|| DiagramError::BadRotation(id.clone(), format!("bad dart `{rn}`")))?;
            if seen[role as usize] {
                return Err(DiagramError::BadRotation(
                    id,
                    format!("duplicate dart `{rn}`"),
                ));
            }
            seen[role as usize] = true;
            rotation[k] = role;
        }
        if c.sign != 1 && c.sign != -1 {
            return Err(DiagramError::BadRotation(
                id,
                format!("crossing sign must be ±1, got {}", c.sign),
            ));
        }
        crossings.push(CrossingSite {
            id,
            sign: c.sign,
            slots: [
                seg_ref(&c.s1),
                seg_ref(&c.s2),
                seg_ref(&c.s1p),
                seg_ref(&c.s2p),
            ],
            rotation,
        });
    }

    // Knot traversal with turnback offsets.
    let mut diagram = OpenDiagram {
        name: doc.name.clone(),
        segments,
        boundary_in: b_in,
        boundary_out: b_out,
        crossings,
        turnbacks,
        traversal: Vec::new(),
    };
    diagram.traversal = trace_knot(&diagram)?;

    // Region structure sanity: Euler characteristic of the closed diagram.
    compute_regions(&diagram)?;
    Ok(diagram)
}

fn trace_knot(d: &OpenDiagram) -> Result<Vec<Visit>, DiagramError> {
    let find_input = |seg: SegRef| -> Option<(usize, bool)> {
        for (ci, c) in d.crossings.iter().enumerate() {
            if c.slot(Role::S1) == seg {
                return Some((ci, true));
            }
            if c.slot(Role::S2) == seg {
                return Some((ci, false));
            }
        }
        None
    };

    let mut visits = Vec::new();
    let mut seg = SegRef::BoundaryIn;
    let mut offset: i64 = 0;
    let mut visited = vec![[false; 2]; d.crossings.len()];
    loop {
        if let SegRef::Internal(i) = seg {
            offset += d.sigma_sum(i);
        }
        let (ci, slot1) = find_input(seg).ok_or_else(|| {
            DiagramError::NotAKnot(format!("segment `{}` has no input slot", d.seg_name(seg)))
        })?;
        let idx = if slot1 { 0 } else { 1 };
        if visited[ci][idx] {
            return Err(DiagramError::NotAKnot(format!(
                "crossing `{}` passed twice through the same strand",
                d.crossings[ci].id
            )));
        }
        visited[ci][idx] = true;
        visits.push(Visit {
            crossing: ci,
            enters_slot1: slot1,
            offset_sigma: offset,
        });
        let out = if slot1 {
            d.crossings[ci].slot(Role::S1p)
        } else {
            d.crossings[ci].slot(Role::S2p)
        };
        match out {
            SegRef::BoundaryOut => break,
            SegRef::BoundaryIn => {
                return Err(DiagramError::NotAKnot(
                    "strand re-enters through the incoming boundary".into(),
                ))
            }
            s => seg = s,
        }
    }
    if visits.len() != 2 * d.crossings.len() {
        return Err(DiagramError::NotAKnot(format!(
            "traversal closed after {} of {} crossing passages; closure is a link",
            visits.len(),
            2 * d.crossings.len()
        )));
    }
    Ok(visits)
}

// ---------------------------------------------------------------------------
// Regions
// ---------------------------------------------------------------------------

/// One face of the closed combinatorial map.
#[derive(Debug, Clone, Serialize)]
pub struct Region {
    pub id: usize,
    /// Darts on the boundary, as (crossing index, role) pairs; the region lies
    /// on the left of each dart walking from the crossing outward.
    pub darts: Vec<(usize, Role)>,
}

/// The region structure of the closed diagram, with per-segment above/below
/// incidence relative to the segment orientation.
#[derive(Debug, Clone)]
pub struct Regions {
    pub regions: Vec<Region>,
    /// For each internal segment, the region above (left of the orientation).
    pub above: Vec<usize>,
    /// For each internal segment, the region below.
    pub below: Vec<usize>,
    /// Above/below of the (merged) boundary segment of the closure.
    pub boundary_above: usize,
    pub boundary_below: usize,
}

/// Compute the faces of the closed-diagram combinatorial map.
///
/// Darts are indexed `4·crossing + role`; the face to the left of a dart `d`
/// (walking from its crossing along the segment) is traced by
/// `d ↦ ccw_prev(opposite(d))`.
pub fn compute_regions(d: &OpenDiagram) -> Result<Regions, DiagramError> {
    let nc = d.crossings.len();
    let dart_count = 4 * nc;
    let dart = |ci: usize, role: Role| ci * 4 + role as usize;

    // Edge involution: pair the output-slot dart with the input-slot dart of
    // every segment; the closure edge pairs BoundaryOut's with BoundaryIn's.
    let mut alpha = vec![usize::MAX; dart_count];
    let pair = |alpha: &mut Vec<usize>, a: usize, b: usize| {
        alpha[a] = b;
        alpha[b] = a;
    };
    for i in 0..d.num_internal() {
        let (co, ro) = d.output_slot(SegRef::Internal(i));
        let (cin, rin) = d.input_slot(SegRef::Internal(i));
        pair(&mut alpha, dart(co, ro), dart(cin, rin));
    }
    {
        let (co, ro) = d.output_slot(SegRef::BoundaryOut);
        let (cin, rin) = d.input_slot(SegRef::BoundaryIn);
        pair(&mut alpha, dart(co, ro), dart(cin, rin));
    }

    // ccw_prev permutation from the rotation system.
    let mut ccw_prev = vec![usize::MAX; dart_count];
    for (ci, c) in d.crossings.iter().enumerate() {
        for k in 0..4 {
            let here = dart(ci, c.rotation[k]);
            let prev = dart(ci, c.rotation[(k + 3) % 4]);
            ccw_prev[here] = prev;
        }
    }

    // Face orbits of d ↦ ccw_prev(alpha(d)).
    let mut face_of = vec![usize::MAX; dart_count];
    let mut regions: Vec<Region> = Vec::new();
    for start in 0..dart_count {
        if face_of[start] != usize::MAX {
            continue;
        }
        let id = regions.len();
        let mut darts = Vec::new();
        let mut cur = start;
        loop {
            face_of[cur] = id;
            darts.push((cur / 4, Role::ALL[cur % 4]));
            cur = ccw_prev[alpha[cur]];
            if cur == start {
                break;
            }
            if darts.len() > dart_count {
                return Err(DiagramError::BadRotation(
                    d.crossings[start / 4].id.clone(),
                    "face traversal does not close".into(),
                ));
            }
        }
        regions.push(Region { id, darts });
    }

    // Euler check for the sphere embedding.
    let v = nc;
    let e = 2 * nc;
    let f = regions.len();
    if v + f != e + 2 {
        return Err(DiagramError::EulerCheckFailed { v, e, f });
    }

    let mut above = Vec::with_capacity(d.num_internal());
    let mut below = Vec::with_capacity(d.num_internal());
    for i in 0..d.num_internal() {
        let (co, ro) = d.output_slot(SegRef::Internal(i));
        let (cin, rin) = d.input_slot(SegRef::Internal(i));
        above.push(face_of[dart(co, ro)]);
        below.push(face_of[dart(cin, rin)]);
    }
    let (co, ro) = d.output_slot(SegRef::BoundaryOut);
    let (cin, rin) = d.input_slot(SegRef::BoundaryIn);
    Ok(Regions {
        regions,
        above,
        below,
        boundary_above: face_of[dart(co, ro)],
        boundary_below: face_of[dart(cin, rin)],
    })
}

impl Regions {
    pub fn count(&self) -> usize {
        self.regions.len()
    }

    /// Above/below region of any segment reference.
    pub fn incidence(&self, seg: SegRef) -> (usize, usize) {
        match seg {
            SegRef::Internal(i) => (self.above[i], self.below[i]),
            _ => (self.boundary_above, self.boundary_below),
        }
    }
}

// ---------------------------------------------------------------------------
// Builtins
// ---------------------------------------------------------------------------

/// The open figure-eight document, with the segment labels, crossing roles
/// and turnback layout of the standard 4-crossing picture.
pub fn figure8_doc() -> DiagramDoc {
    let rot = |v: [&str; 4]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    DiagramDoc {
        name: "figure8".into(),
        crossings: vec![
            CrossingDoc {
                id: Some("c0".into()),
                sign: 1,
                s1: "bin".into(),
                s2: "t5".into(),
                s1p: "t1".into(),
                s2p: "t6".into(),
            },
            CrossingDoc {
                id: Some("c1".into()),
                sign: 1,
                s1: "t4".into(),
                s2: "t1".into(),
                s1p: "t5".into(),
                s2p: "t2".into(),
            },
            CrossingDoc {
                id: Some("c2".into()),
                sign: -1,
                s1: "t3".into(),
                s2: "t6".into(),
                s1p: "t4".into(),
                s2p: "t7".into(),
            },
            CrossingDoc {
                id: Some("c3".into()),
                sign: -1,
                s1: "t7".into(),
                s2: "t2".into(),
                s1p: "bout".into(),
                s2p: "t3".into(),
            },
        ],
        turnbacks: vec![
            TurnbackDoc {
                kind: TurnbackKind::CupNeg,
                from: "t2".into(),
                to: "t2".into(),
            },
            TurnbackDoc {
                kind: TurnbackKind::CapNeg,
                from: "t3".into(),
                to: "t3".into(),
            },
            TurnbackDoc {
                kind: TurnbackKind::CapPos,
                from: "t5".into(),
                to: "t5".into(),
            },
            TurnbackDoc {
                kind: TurnbackKind::CupPos,
                from: "t6".into(),
                to: "t6".into(),
            },
        ],
        boundary: BoundaryDoc {
            input: "bin".into(),
            output: "bout".into(),
        },
        rotation: BTreeMap::from([
            ("c0".into(), rot(["s2", "s1p", "s2p", "s1"])),
            ("c1".into(), rot(["s2p", "s1", "s2", "s1p"])),
            ("c2".into(), rot(["s2p", "s1", "s2", "s1p"])),
            ("c3".into(), rot(["s2", "s1p", "s2p", "s1"])),
        ]),
    }
}

/// A 3-crossing open trefoil: braid closure of σ₁³ cut at the bottom strand,
/// all crossings positive.
pub fn trefoil_doc() -> DiagramDoc {
    let rot = |v: [&str; 4]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    DiagramDoc {
        name: "trefoil".into(),
        crossings: vec![
            CrossingDoc {
                id: Some("c0".into()),
                sign: 1,
                s1: "t3".into(),
                s2: "bin".into(),
                s1p: "t4".into(),
                s2p: "t1".into(),
            },
            CrossingDoc {
                id: Some("c1".into()),
                sign: 1,
                s1: "t1".into(),
                s2: "t4".into(),
                s1p: "t2".into(),
                s2p: "t5".into(),
            },
            CrossingDoc {
                id: Some("c2".into()),
                sign: 1,
                s1: "t5".into(),
                s2: "t2".into(),
                s1p: "bout".into(),
                s2p: "t3".into(),
            },
        ],
        turnbacks: vec![
            TurnbackDoc {
                kind: TurnbackKind::CapPos,
                from: "t3".into(),
                to: "t3".into(),
            },
            TurnbackDoc {
                kind: TurnbackKind::CupPos,
                from: "t3".into(),
                to: "t3".into(),
            },
            TurnbackDoc {
                kind: TurnbackKind::CupNeg,
                from: "t3".into(),
                to: "t3".into(),
            },
            TurnbackDoc {
                kind: TurnbackKind::CapNeg,
                from: "t3".into(),
                to: "t3".into(),
            },
        ],
        boundary: BoundaryDoc {
            input: "bin".into(),
            output: "bout".into(),
        },
        rotation: BTreeMap::from([
            ("c0".into(), rot(["s1p", "s2p", "s1", "s2"])),
            ("c1".into(), rot(["s1p", "s2p", "s1", "s2"])),
            ("c2".into(), rot(["s1p", "s2p", "s1", "s2"])),
        ]),
    }
}

/// Parse a built-in diagram by name.
pub fn builtin(name: &str) -> Result<OpenDiagram, DiagramError> {
    match name {
        "figure8" => parse_diagram(&figure8_doc()),
        "trefoil" => parse_diagram(&trefoil_doc()),
        other => Err(DiagramError::UnknownBuiltin(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure8_counts() {
        let d = builtin("figure8").unwrap();
        assert_eq!(d.crossing_number(), 4);
        assert_eq!(d.num_internal(), 7);
        assert_eq!(d.turnbacks.len(), 4);
        assert_eq!(2 * d.crossing_number(), d.num_internal() + 1);
    }

    #[test]
    fn trefoil_counts() {
        let d = builtin("trefoil").unwrap();
        assert_eq!(d.crossing_number(), 3);
        assert_eq!(d.num_internal(), 5);
        assert_eq!(2 * d.crossing_number(), d.num_internal() + 1);
    }

    #[test]
    fn unknown_builtin_errors() {
        assert!(matches!(
            builtin("unknown"),
            Err(DiagramError::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn figure8_regions() {
        let d = builtin("figure8").unwrap();
        let r = compute_regions(&d).unwrap();
        assert_eq!(r.count(), 6, "F = cr + 2");
        for i in 0..d.num_internal() {
            assert_ne!(r.above[i], r.below[i], "segment {i} above == below");
        }
    }

    #[test]
    fn trefoil_regions() {
        let d = builtin("trefoil").unwrap();
        let r = compute_regions(&d).unwrap();
        assert_eq!(r.count(), 5);
        for i in 0..d.num_internal() {
            assert_ne!(r.above[i], r.below[i]);
        }
    }

    #[test]
    fn figure8_traversal_offsets() {
        // Passages in knot order: c0 (1,1'), c1 (2,2'), c3 (2,2'), c2 (1,1'),
        // c1 (1,1'), c0 (2,2'), c2 (2,2'), c3 (1,1'); the σ = −1 turnback on
        // t3 activates an offset that the σ = +1 on t5 cancels.
        let d = builtin("figure8").unwrap();
        let got: Vec<(usize, bool, i64)> = d
            .traversal
            .iter()
            .map(|v| (v.crossing, v.enters_slot1, v.offset_sigma))
            .collect();
        assert_eq!(
            got,
            vec![
                (0, true, 0),
                (1, false, 0),
                (3, false, 0),
                (2, true, -1),
                (1, true, -1),
                (0, false, 0),
                (2, false, 0),
                (3, true, 0),
            ]
        );
    }

    #[test]
    fn trefoil_traversal_is_shift_free() {
        let d = builtin("trefoil").unwrap();
        assert!(d.traversal.iter().all(|v| v.offset_sigma == 0));
        assert_eq!(d.traversal.len(), 6);
    }

    #[test]
    fn figure8_arcs() {
        let d = builtin("figure8").unwrap();
        let arcs = d.arcs();
        assert_eq!(arcs.len(), 4, "one arc per crossing in the closure");
        // The boundary arc contains bin, t1 and bout.
        let bd = &arcs[0];
        assert!(bd.contains(&SegRef::BoundaryIn) && bd.contains(&SegRef::BoundaryOut));
        assert!(bd.contains(&SegRef::Internal(d.segment_index("t1").unwrap())));
    }

    #[test]
    fn round_trip_through_document() {
        for name in ["figure8", "trefoil"] {
            let d = builtin(name).unwrap();
            let doc = d.to_document();
            let text = doc.to_json();
            let reparsed = parse_diagram(&DiagramDoc::from_json(&text).unwrap()).unwrap();
            assert_eq!(reparsed.segments, d.segments);
            assert_eq!(reparsed.crossings.len(), d.crossings.len());
            for (a, b) in reparsed.crossings.iter().zip(&d.crossings) {
                assert_eq!(a.sign, b.sign);
                assert_eq!(a.slots, b.slots);
                assert_eq!(a.rotation, b.rotation);
            }
        }
    }

    #[test]
    fn triple_use_of_segment_is_rejected() {
        let mut doc = trefoil_doc();
        doc.crossings[2].s2 = "t1".into(); // t1 now appears in three roles
        match parse_diagram(&doc) {
            Err(DiagramError::BadIncidence(_, _)) => {}
            other => panic!("expected incidence error, got {other:?}"),
        }
    }

    #[test]
    fn zero_crossings_rejected() {
        let doc = DiagramDoc {
            name: "empty".into(),
            crossings: vec![],
            turnbacks: vec![],
            boundary: BoundaryDoc {
                input: "a".into(),
                output: "b".into(),
            },
            rotation: BTreeMap::new(),
        };
        assert!(matches!(
            parse_diagram(&doc),
            Err(DiagramError::ZeroCrossings)
        ));
    }

    #[test]
    fn corrupt_rotation_fails_euler_check() {
        let mut doc = trefoil_doc();
        // Swapping two darts at one crossing turns the sphere embedding into
        // a higher-genus map.
        doc.rotation.insert(
            "c1".into(),
            ["s2p", "s1p", "s1", "s2"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        match parse_diagram(&doc) {
            Err(DiagramError::EulerCheckFailed { .. }) => {}
            other => panic!("expected Euler failure, got {other:?}"),
        }
    }

    #[test]
    fn link_closure_is_rejected() {
        // Two crossings wired so the strand closes early.
        let doc = DiagramDoc {
            name: "link".into(),
            crossings: vec![
                CrossingDoc {
                    id: Some("c0".into()),
                    sign: 1,
                    s1: "bin".into(),
                    s2: "a".into(),
                    s1p: "bout".into(),
                    s2p: "a".into(),
                },
                CrossingDoc {
                    id: Some("c1".into()),
                    sign: 1,
                    s1: "b".into(),
                    s2: "c".into(),
                    s1p: "b".into(),
                    s2p: "c".into(),
                },
            ],
            turnbacks: vec![],
            boundary: BoundaryDoc {
                input: "bin".into(),
                output: "bout".into(),
            },
            rotation: BTreeMap::from([
                (
                    "c0".into(),
                    ["s1", "s2", "s1p", "s2p"]
                        .iter()
                        .map(|s| s.to_string())
                        .collect(),
                ),
                (
                    "c1".into(),
                    ["s1", "s2", "s1p", "s2p"]
                        .iter()
                        .map(|s| s.to_string())
                        .collect(),
                ),
            ]),
        };
        match parse_diagram(&doc) {
            Err(DiagramError::NotAKnot(_)) => {}
            other => panic!("expected NotAKnot, got {other:?}"),
        }
    }
}
