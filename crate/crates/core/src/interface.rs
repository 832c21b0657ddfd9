//! Interface curve, cell classification and cut-cell geometry.
//!
//! Sign convention: the oriented level function is negative in the minus
//! subdomain. Points within `eps` of the curve count as minus (closure of the
//! minus side). Each cut cell has one "lone" vertex on one side and two on the
//! other; the interface enters and leaves through the two edges at the lone
//! vertex.

use std::fmt::Debug;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, GeometryViolation, Result};
use crate::geometry::{cross, polygon_moments, rot_cw, Barycentric, Side, Vec2};
use crate::mesh::TriMesh;
use crate::quadrature::{GaussLegendre, TriangleRule};

/// Relative tie-break tolerance; the absolute tolerance is this times `h`.
pub const EPS_GEOM_REL: f64 = 1e-12;

/// A piece of the curve between two points, in the curve's own parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcSegment {
    pub start: f64,
    /// Signed parameter increment from the first to the second endpoint.
    pub sweep: f64,
}

/// Closed simple C2 curve. Implementations supply the point queries and arc
/// operations; everything downstream goes through this trait.
pub trait Curve: Send + Sync + Debug {
    /// Signed distance, negative in the enclosed region.
    fn signed_distance(&self, x: Vec2) -> f64;
    /// Unit normal pointing out of the enclosed region, at the curve point
    /// nearest to `x`.
    fn outward_normal(&self, x: Vec2) -> Vec2;
    /// Parameters `t` of transversal intersections of the line `p + t (q - p)`
    /// with the curve, ascending. Contacts closer than `eps` to tangency are
    /// dropped.
    fn line_roots(&self, p: Vec2, q: Vec2, eps: f64) -> Vec<f64>;
    /// The arc joining `p1` to `p2` whose midpoint is nearest to `hint`.
    fn arc_through(&self, p1: Vec2, p2: Vec2, hint: Vec2) -> Result<ArcSegment>;
    /// Point at fraction `s` in `[0, 1]` along the arc.
    fn arc_point(&self, arc: &ArcSegment, s: f64) -> Vec2;
    /// Derivative of [`Curve::arc_point`] with respect to `s`.
    fn arc_velocity(&self, arc: &ArcSegment, s: f64) -> Vec2;
    fn arc_length(&self, arc: &ArcSegment) -> f64;
    /// `arc_point(arc, s)` minus the midpoint of the arc's chord. Override
    /// when this can be formed without cancellation on short arcs.
    fn arc_chord_offset(&self, arc: &ArcSegment, s: f64) -> Vec2 {
        self.arc_point(arc, s) - 0.5 * (self.arc_point(arc, 0.0) + self.arc_point(arc, 1.0))
    }
    /// `|cross(arc_chord_offset, arc_velocity)|`, the Jacobian of the ray map
    /// from the chord midpoint before the radial factor.
    fn cap_ray_jacobian(&self, arc: &ArcSegment, s: f64) -> f64 {
        cross(self.arc_chord_offset(arc, s), self.arc_velocity(arc, s)).abs()
    }
    /// Area and first moment of the region between the chord and the arc.
    fn cap_moments(&self, arc: &ArcSegment) -> (f64, Vec2);
    fn max_curvature(&self) -> f64;
    /// Any point on the curve.
    fn sample_point(&self) -> Vec2;
    /// Axis-aligned bounding box `(min, max)`.
    fn bounding_box(&self) -> (Vec2, Vec2);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Parameter(format!(
                "circle radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    fn angle(&self, x: Vec2) -> f64 {
        let d = x - self.center;
        d.y.atan2(d.x)
    }
}

/// `x - sin x`, accurate for small `x`.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() > 0.5 {
        return x - x.sin();
    }
    let x2 = x * x;
    let mut term = x * x2 / 6.0;
    let mut sum = 0.0;
    let mut k = 3.0;
    for _ in 0..8 {
        sum += term;
        term *= -x2 / ((k + 1.0) * (k + 2.0));
        k += 2.0;
    }
    sum
}

impl Curve for Circle {
    fn signed_distance(&self, x: Vec2) -> f64 {
        (x - self.center).norm() - self.radius
    }

    fn outward_normal(&self, x: Vec2) -> Vec2 {
        (x - self.center).normalize()
    }

    fn line_roots(&self, p: Vec2, q: Vec2, eps: f64) -> Vec<f64> {
        let d = q - p;
        let a = d.norm_squared();
        let w = p - self.center;
        let b = 2.0 * d.dot(&w);
        let c = w.norm_squared() - self.radius * self.radius;
        // delta is the distance from the center to the line
        let delta2 = (w.norm_squared() - d.dot(&w).powi(2) / a).max(0.0);
        if self.radius - delta2.sqrt() <= eps {
            return Vec::new();
        }
        let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
        let sgn = if b >= 0.0 { 1.0 } else { -1.0 };
        let qq = -0.5 * (b + sgn * disc);
        let (t1, t2) = if qq == 0.0 {
            let t = disc / (2.0 * a);
            (-t, t)
        } else {
            (qq / a, c / qq)
        };
        if t1 <= t2 {
            vec![t1, t2]
        } else {
            vec![t2, t1]
        }
    }

    fn arc_through(&self, p1: Vec2, p2: Vec2, hint: Vec2) -> Result<ArcSegment> {
        if (p1 - p2).norm() <= EPS_GEOM_REL * self.radius {
            return Err(Error::DegenerateArc { x: p1.x, y: p1.y });
        }
        let start = self.angle(p1);
        let ccw = (self.angle(p2) - start).rem_euclid(std::f64::consts::TAU);
        let candidates = [ccw, ccw - std::f64::consts::TAU];
        let dist = |sweep: f64| {
            let arc = ArcSegment { start, sweep };
            (self.arc_point(&arc, 0.5) - hint).norm()
        };
        let sweep = if dist(candidates[0]) <= dist(candidates[1]) {
            candidates[0]
        } else {
            candidates[1]
        };
        Ok(ArcSegment { start, sweep })
    }

    fn arc_point(&self, arc: &ArcSegment, s: f64) -> Vec2 {
        let th = arc.start + s * arc.sweep;
        self.center + self.radius * Vec2::new(th.cos(), th.sin())
    }

    fn arc_velocity(&self, arc: &ArcSegment, s: f64) -> Vec2 {
        let th = arc.start + s * arc.sweep;
        self.radius * arc.sweep * Vec2::new(-th.sin(), th.cos())
    }

    fn arc_length(&self, arc: &ArcSegment) -> f64 {
        self.radius * arc.sweep.abs()
    }

    fn arc_chord_offset(&self, arc: &ArcSegment, s: f64) -> Vec2 {
        let half = 0.5 * arc.sweep;
        let phi = (s - 0.5) * arc.sweep;
        let mid = arc.start + half;
        let radial = Vec2::new(mid.cos(), mid.sin());
        let tangential = Vec2::new(-mid.sin(), mid.cos());
        // cos(phi) - cos(half) in product form
        let drop = 2.0 * (0.5 * (half + phi)).sin() * (0.5 * (half - phi)).sin();
        self.radius * (drop * radial + phi.sin() * tangential)
    }

    fn cap_ray_jacobian(&self, arc: &ArcSegment, s: f64) -> f64 {
        let half = 0.5 * arc.sweep;
        let phi = (s - 0.5) * arc.sweep;
        // 1 - cos(half) cos(phi) without cancellation
        let g = 2.0 * (0.5 * half).sin().powi(2) + 2.0 * half.cos() * (0.5 * phi).sin().powi(2);
        self.radius * self.radius * arc.sweep.abs() * g
    }

    fn cap_moments(&self, arc: &ArcSegment) -> (f64, Vec2) {
        let r = self.radius;
        let full = arc.sweep.abs();
        let area = 0.5 * r * r * x_minus_sin(full);
        let mid = arc.start + 0.5 * arc.sweep;
        let dir = Vec2::new(mid.cos(), mid.sin());
        // area times centroid distance is 2/3 r^3 sin^3(half angle)
        let lever = 2.0 / 3.0 * r.powi(3) * (0.5 * full).sin().powi(3);
        (area, area * self.center + lever * dir)
    }

    fn max_curvature(&self) -> f64 {
        1.0 / self.radius
    }

    fn sample_point(&self) -> Vec2 {
        self.center + Vec2::new(self.radius, 0.0)
    }

    fn bounding_box(&self) -> (Vec2, Vec2) {
        let r = Vec2::new(self.radius, self.radius);
        (self.center - r, self.center + r)
    }
}

/// The interface together with the choice of which side it encloses.
#[derive(Debug, Clone)]
pub struct Interface {
    curve: Arc<dyn Curve>,
    /// Subdomain enclosed by the curve.
    pub inclusion: Side,
}

/// Outcome of the mesh/curve admissibility checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub curvature_times_h: f64,
    /// Distance from the curve's bounding box to the boundary of the square.
    pub boundary_gap: f64,
    /// `h < r / 2` with the tubular radius taken as `1 / curvature`.
    pub mesh_fine_enough: bool,
}

impl Interface {
    pub fn new(curve: Arc<dyn Curve>, inclusion: Side) -> Self {
        Self { curve, inclusion }
    }

    /// Circle enclosing the minus subdomain.
    pub fn circle(center: Vec2, radius: f64) -> Result<Self> {
        Ok(Self::new(
            Arc::new(Circle::new(center, radius)?),
            Side::Minus,
        ))
    }

    pub fn with_inclusion(mut self, inclusion: Side) -> Self {
        self.inclusion = inclusion;
        self
    }

    pub fn curve(&self) -> &dyn Curve {
        self.curve.as_ref()
    }

    /// Oriented level function, negative in the minus subdomain.
    pub fn level(&self, x: Vec2) -> f64 {
        let d = self.curve.signed_distance(x);
        match self.inclusion {
            Side::Minus => d,
            Side::Plus => -d,
        }
    }

    pub fn side_of(&self, x: Vec2, eps: f64) -> Side {
        if self.level(x) <= eps {
            Side::Minus
        } else {
            Side::Plus
        }
    }

    /// Unit normal pointing out of the plus subdomain.
    pub fn normal_out_of_plus(&self, x: Vec2) -> Vec2 {
        let n = self.curve.outward_normal(x);
        match self.inclusion {
            Side::Minus => -n,
            Side::Plus => n,
        }
    }

    pub fn admissibility(&self, h: f64) -> Admissibility {
        let kappa = self.curve.max_curvature();
        let (lo, hi) = self.curve.bounding_box();
        let gap = (lo.x + 1.0).min(lo.y + 1.0).min(1.0 - hi.x).min(1.0 - hi.y);
        Admissibility {
            curvature_times_h: kappa * h,
            boundary_gap: gap,
            mesh_fine_enough: h < 0.5 / kappa,
        }
    }

    /// Arc midpoint of the interface piece joining `p1` and `p2` nearest to
    /// `hint`, with the normal out of the plus side and the tangent obtained by
    /// a clockwise quarter turn of that normal.
    pub fn arc_midpoint(&self, p1: Vec2, p2: Vec2, hint: Vec2) -> Result<(Vec2, Vec2, Vec2)> {
        let arc = self.curve.arc_through(p1, p2, hint)?;
        let x0 = self.curve.arc_point(&arc, 0.5);
        let n0 = self.normal_out_of_plus(x0);
        Ok((x0, n0, rot_cw(n0)))
    }
}

/// Intersections of the segment `p -> q` with the curve: transversal crossings
/// with parameter in `[0, 1]`, deduplicated.
pub fn segment_curve_intersections(p: Vec2, q: Vec2, curve: &dyn Curve, eps: f64) -> Vec<Vec2> {
    let len = (q - p).norm();
    let t_eps = eps / len;
    let mut out: Vec<Vec2> = Vec::with_capacity(2);
    for t in curve.line_roots(p, q, eps) {
        if t < -t_eps || t > 1.0 + t_eps {
            continue;
        }
        let x = p + t.clamp(0.0, 1.0) * (q - p);
        if out.iter().all(|y| (x - *y).norm() > eps) {
            out.push(x);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Minus,
    Plus,
    Cut,
}

impl CellClass {
    pub fn side(self) -> Option<Side> {
        match self {
            CellClass::Minus => Some(Side::Minus),
            CellClass::Plus => Some(Side::Plus),
            CellClass::Cut => None,
        }
    }
}

impl From<Side> for CellClass {
    fn from(s: Side) -> Self {
        match s {
            Side::Minus => CellClass::Minus,
            Side::Plus => CellClass::Plus,
        }
    }
}

/// How an edge splits between the two sides, in the orientation
/// `vertices[0] -> vertices[1]` of the mesh edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSplit {
    pub crossing: Option<Vec2>,
    /// Sub-segment lying on each side (indexed by [`Side::index`]); `None`
    /// when empty.
    pub segments: [Option<(Vec2, Vec2)>; 2],
}

impl EdgeSplit {
    pub fn length(&self, side: Side) -> f64 {
        self.segments[side.index()].map_or(0.0, |(a, b)| (b - a).norm())
    }
}

fn split_edge(
    iface: &Interface,
    a: Vec2,
    b: Vec2,
    sa: Side,
    sb: Side,
    eps: f64,
) -> std::result::Result<EdgeSplit, ()> {
    let len = (b - a).norm();
    let t_eps = eps / len;
    let roots = iface.curve.line_roots(a, b, eps);
    let interior = |t: f64| t > t_eps && t < 1.0 - t_eps;
    if sa == sb {
        if roots.iter().any(|&t| interior(t)) {
            return Err(());
        }
        let mut segments = [None, None];
        segments[sa.index()] = Some((a, b));
        return Ok(EdgeSplit {
            crossing: None,
            segments,
        });
    }
    let dist_to_unit = |t: f64| (-t).max(t - 1.0).max(0.0);
    let t = match roots
        .iter()
        .copied()
        .min_by(|x, y| dist_to_unit(*x).total_cmp(&dist_to_unit(*y)))
    {
        Some(t) if dist_to_unit(t) <= 1e-6 => t.clamp(0.0, 1.0),
        // near-tangent roots were filtered out; fall back to bisection on the
        // level function
        _ => {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let la = iface.level(a);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (iface.level(a + mid * (b - a)) > eps) == (la > eps) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    };
    let mut p = a + t * (b - a);
    if (p - a).norm() <= eps {
        p = a;
    } else if (p - b).norm() <= eps {
        p = b;
    }
    let mut segments = [None, None];
    if p != a {
        segments[sa.index()] = Some((a, p));
    }
    if p != b {
        segments[sb.index()] = Some((p, b));
    }
    Ok(EdgeSplit {
        crossing: Some(p),
        segments,
    })
}

/// A point where the interface meets the cell boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub point: Vec2,
    /// Local edge `k` joins local vertices `k` and `(k + 1) % 3`.
    pub local_edge: usize,
}

/// Interface data of a cut cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CutData {
    /// Local index of the vertex alone on its side.
    pub lone: usize,
    /// `p1` on local edge `lone`, `p2` on local edge `(lone + 2) % 3`.
    pub crossings: [Crossing; 2],
    pub arc: ArcSegment,
    /// Arc-length midpoint of the interface piece.
    pub x0: Vec2,
    /// Unit normal at `x0` pointing out of the plus side.
    pub n0: Vec2,
    /// Clockwise quarter turn of `n0`.
    pub t0: Vec2,
    pub arc_length: f64,
    /// `+1` when the lone-vertex region is the triangle `(lone, p1, p2)` plus
    /// the cap between chord and arc, `-1` when the cap is removed from it.
    pub cap_sign: f64,
}

/// Geometric record of one cell: classification, sub-areas, centroids and
/// sub-edge lengths. Uncut cells carry the whole cell on their own side.
#[derive(Debug, Clone, PartialEq)]
pub struct CutElement {
    pub cell: usize,
    pub class: CellClass,
    pub vertices: [Vec2; 3],
    pub vertex_sides: [Side; 3],
    pub cut: Option<CutData>,
    /// Sub-areas indexed by side.
    pub area: [f64; 2],
    /// Sub-centroids indexed by side (zero for an empty side).
    pub centroid: [Vec2; 2],
    /// Sub-areas when the cell is split along the chord `p1 p2`.
    pub chord_area: [f64; 2],
    pub chord_centroid: [Vec2; 2],
    /// `edge_lengths[k][side]` for local edge `k`.
    pub edge_lengths: [[f64; 2]; 3],
}

impl CutElement {
    pub fn is_cut(&self) -> bool {
        self.cut.is_some()
    }

    pub fn total_area(&self) -> f64 {
        self.area[0] + self.area[1]
    }

    /// Side containing a vertex, with the lone vertex deciding for cut cells.
    pub fn side_of_vertex(&self, local: usize) -> Side {
        self.vertex_sides[local]
    }

    /// Sub-areas and sub-centroids under `rule`.
    pub fn measures(&self, rule: RegionRule) -> ([f64; 2], [Vec2; 2]) {
        match rule {
            RegionRule::Curved => (self.area, self.centroid),
            RegionRule::Chord => (self.chord_area, self.chord_centroid),
        }
    }
}

/// How a cut cell is split into its two sub-regions for the integrals of the
/// discrete forms. Error measures always use the curved split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegionRule {
    /// Along the interface arc.
    Curved,
    /// Along the straight chord between the two edge crossings.
    #[default]
    Chord,
}

impl RegionRule {
    pub fn name(self) -> &'static str {
        match self {
            RegionRule::Curved => "curved",
            RegionRule::Chord => "chord",
        }
    }
}

impl std::fmt::Display for RegionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RegionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "curved" => Ok(RegionRule::Curved),
            "chord" => Ok(RegionRule::Chord),
            other => Err(Error::Parameter(format!("unknown region rule `{other}`"))),
        }
    }
}

fn build_element(
    mesh: &TriMesh,
    iface: &Interface,
    cell: usize,
    sides: [Side; 3],
    splits: [&EdgeSplit; 3],
    eps: f64,
) -> Result<CutElement> {
    let vertices = mesh.cell_points(cell);
    let bary = Barycentric::new(vertices);

    // per-local-edge sub-lengths; edge lengths do not depend on orientation
    let mut edge_lengths = [[0.0; 2]; 3];
    for k in 0..3 {
        for s in Side::BOTH {
            edge_lengths[k][s.index()] = splits[k].length(s);
        }
    }

    let uncut = |side: Side| {
        let mut area = [0.0; 2];
        let mut centroid = [Vec2::zeros(); 2];
        area[side.index()] = bary.area;
        centroid[side.index()] = bary.centroid();
        let mut lengths = [[0.0; 2]; 3];
        for k in 0..3 {
            lengths[k][side.index()] = (vertices[(k + 1) % 3] - vertices[k]).norm();
        }
        CutElement {
            cell,
            class: side.into(),
            vertices,
            vertex_sides: sides,
            cut: None,
            area,
            centroid,
            chord_area: area,
            chord_centroid: centroid,
            edge_lengths: lengths,
        }
    };

    let n_minus = sides.iter().filter(|s| **s == Side::Minus).count();
    if n_minus == 0 || n_minus == 3 {
        let side = sides[0];
        // a closed curve that crosses no edge is either inside or outside
        let sample = iface.curve.sample_point();
        let l = bary.coords(sample);
        if l.iter().all(|&v| v > 0.0) {
            return Err(Error::Geometry {
                cell,
                violation: GeometryViolation::InterfaceEnclosed,
            });
        }
        return Ok(uncut(side));
    }

    let lone = (0..3)
        .find(|&k| sides[k] != sides[(k + 1) % 3] && sides[k] != sides[(k + 2) % 3])
        .expect("two sides present");
    let crossing_of = |k: usize| -> Result<Vec2> {
        splits[k].crossing.ok_or(Error::Geometry {
            cell,
            violation: GeometryViolation::CrossingCount { count: 1 },
        })
    };
    let e1 = lone;
    let e2 = (lone + 2) % 3;
    let p1 = crossing_of(e1)?;
    let p2 = crossing_of(e2)?;
    let majority = sides[(lone + 1) % 3];
    if (p1 - p2).norm() <= eps {
        // both crossings collapsed onto the lone vertex: the cell only touches
        // the interface there
        return Ok(uncut(majority));
    }
    let curve = iface.curve.as_ref();
    let arc = curve.arc_through(p1, p2, bary.centroid())?;
    let x0 = curve.arc_point(&arc, 0.5);
    let n0 = iface.normal_out_of_plus(x0);
    let t0 = rot_cw(n0);
    let arc_length = curve.arc_length(&arc);

    let v_lone = vertices[lone];
    let chord = p2 - p1;
    let bulge = cross(chord, x0 - p1);
    let lone_off = cross(chord, v_lone - p1);
    let cap_sign = if bulge * lone_off < 0.0 { 1.0 } else { -1.0 };
    let (cap_area, cap_moment) = curve.cap_moments(&arc);

    let (tri_area, tri_moment) = polygon_moments(&[v_lone, p1, p2]);
    let lone_area = tri_area + cap_sign * cap_area;
    let lone_moment = tri_moment + cap_sign * cap_moment;
    let total_moment = bary.area * bary.centroid();

    let lone_side = sides[lone];
    let split = |lone_area: f64, lone_moment: Vec2| {
        let other_area = bary.area - lone_area;
        let other_moment = total_moment - lone_moment;
        let mut area = [0.0; 2];
        let mut centroid = [Vec2::zeros(); 2];
        area[lone_side.index()] = lone_area;
        area[majority.index()] = other_area;
        centroid[lone_side.index()] = if lone_area > 0.0 {
            lone_moment / lone_area
        } else {
            v_lone
        };
        centroid[majority.index()] = if other_area > 0.0 {
            other_moment / other_area
        } else {
            bary.centroid()
        };
        (area, centroid)
    };
    let (area, centroid) = split(lone_area, lone_moment);
    let (chord_area, chord_centroid) = split(tri_area, tri_moment);

    Ok(CutElement {
        cell,
        class: CellClass::Cut,
        vertices,
        vertex_sides: sides,
        cut: Some(CutData {
            lone,
            crossings: [
                Crossing {
                    point: p1,
                    local_edge: e1,
                },
                Crossing {
                    point: p2,
                    local_edge: e2,
                },
            ],
            arc,
            x0,
            n0,
            t0,
            arc_length,
            cap_sign,
        }),
        area,
        centroid,
        chord_area,
        chord_centroid,
        edge_lengths,
    })
}

fn local_geometry(
    mesh: &TriMesh,
    iface: &Interface,
    cell: usize,
    eps: f64,
) -> Result<([Side; 3], [EdgeSplit; 3])> {
    let tri = mesh.cells[cell];
    let sides = tri.map(|v| iface.side_of(mesh.vertices[v], eps));
    let mut splits = [EdgeSplit {
        crossing: None,
        segments: [None, None],
    }; 3];
    for k in 0..3 {
        let e = mesh.cell_edges[cell][k];
        splits[k] = edge_split(mesh, iface, e, eps).map_err(|_| Error::Geometry {
            cell,
            violation: GeometryViolation::EdgeCrossedTwice { local_edge: k },
        })?;
    }
    Ok((sides, splits))
}

fn edge_split(
    mesh: &TriMesh,
    iface: &Interface,
    edge: usize,
    eps: f64,
) -> std::result::Result<EdgeSplit, ()> {
    let [p, q] = mesh.edges[edge].vertices;
    let (a, b) = (mesh.vertices[p], mesh.vertices[q]);
    split_edge(
        iface,
        a,
        b,
        iface.side_of(a, eps),
        iface.side_of(b, eps),
        eps,
    )
}

/// Tie-break tolerance for a mesh.
pub fn eps_geom(mesh: &TriMesh) -> f64 {
    EPS_GEOM_REL * mesh.h
}

/// Classify one cell against the interface.
pub fn classify_cell(mesh: &TriMesh, iface: &Interface, cell: usize) -> Result<CellClass> {
    cut_measures(mesh, iface, cell).map(|e| e.class)
}

/// Full geometric record of one cell.
pub fn cut_measures(mesh: &TriMesh, iface: &Interface, cell: usize) -> Result<CutElement> {
    let eps = eps_geom(mesh);
    let (sides, splits) = local_geometry(mesh, iface, cell, eps)?;
    build_element(
        mesh,
        iface,
        cell,
        sides,
        [&splits[0], &splits[1], &splits[2]],
        eps,
    )
}

/// Cut geometry of a whole mesh.
#[derive(Debug, Clone)]
pub struct CutGeometry {
    pub eps: f64,
    pub vertex_sides: Vec<Side>,
    pub edge_splits: Vec<EdgeSplit>,
    pub elements: Vec<CutElement>,
    /// Cells crossed by the interface, ascending.
    pub cut_cells: Vec<usize>,
    /// All edges of cut cells, ascending.
    pub interface_edges: Vec<usize>,
}

impl CutGeometry {
    pub fn build(mesh: &TriMesh, iface: &Interface) -> Result<Self> {
        let eps = eps_geom(mesh);
        let vertex_sides: Vec<Side> = mesh
            .vertices
            .par_iter()
            .map(|&x| iface.side_of(x, eps))
            .collect();
        let edge_splits: Vec<std::result::Result<EdgeSplit, ()>> = (0..mesh.edges.len())
            .into_par_iter()
            .map(|e| edge_split(mesh, iface, e, eps))
            .collect();
        let elements: Vec<CutElement> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let local = mesh.cell_edges[c];
                let mut splits = [None; 3];
                for k in 0..3 {
                    splits[k] =
                        Some(
                            edge_splits[local[k]]
                                .as_ref()
                                .map_err(|_| Error::Geometry {
                                    cell: c,
                                    violation: GeometryViolation::EdgeCrossedTwice {
                                        local_edge: k,
                                    },
                                })?,
                        );
                }
                let sides = mesh.cells[c].map(|v| vertex_sides[v]);
                build_element(
                    mesh,
                    iface,
                    c,
                    sides,
                    [splits[0].unwrap(), splits[1].unwrap(), splits[2].unwrap()],
                    eps,
                )
            })
            .collect::<Result<_>>()?;
        let edge_splits: Vec<EdgeSplit> = edge_splits
            .into_iter()
            .map(|s| s.expect("errors surface through the cells"))
            .collect();
        let cut_cells: Vec<usize> = elements
            .iter()
            .filter(|e| e.is_cut())
            .map(|e| e.cell)
            .collect();
        let mut interface_edges: Vec<usize> =
            cut_cells.iter().flat_map(|&c| mesh.cell_edges[c]).collect();
        interface_edges.sort_unstable();
        interface_edges.dedup();
        Ok(Self {
            eps,
            vertex_sides,
            edge_splits,
            elements,
            cut_cells,
            interface_edges,
        })
    }

    pub fn is_cut(&self, cell: usize) -> bool {
        self.elements[cell].is_cut()
    }

    pub fn total_area(&self, side: Side) -> f64 {
        self.elements.iter().map(|e| e.area[side.index()]).sum()
    }
}

/// Bivariate polynomial `sum c_pq x^p y^q`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly2 {
    pub terms: Vec<(u32, u32, f64)>,
}

impl Poly2 {
    pub fn new(terms: Vec<(u32, u32, f64)>) -> Self {
        Self { terms }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![(0, 0, c)])
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.0 + t.1).max().unwrap_or(0)
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        self.terms
            .iter()
            .map(|&(p, q, c)| c * x.x.powi(p as i32) * x.y.powi(q as i32))
            .sum()
    }
}

const MAX_ARC_LEVELS: usize = 30;
const ARC_REL_TOL: f64 = 1e-12;
/// Largest relative difference accepted as rounding noise.
const ARC_NOISE_TOL: f64 = 1e-6;

/// Integral over the region between the chord and the arc, parametrized by
/// rays from the chord midpoint. Panels are bisected until two levels agree
/// to a relative tolerance of the panel's `|f|` integral plus its share of
/// `floor`, the `|f|` integral over the rest of the sub-region. The floor
/// keeps integrands that nearly vanish on the arc from chasing roundoff;
/// stalled refinement is accepted as noise-limited.
fn cap_integral(
    curve: &dyn Curve,
    arc: &ArcSegment,
    p1: Vec2,
    p2: Vec2,
    floor: f64,
    f: &dyn Fn(Vec2) -> f64,
) -> Result<f64> {
    let mid = 0.5 * (p1 + p2);
    let radial = GaussLegendre::new(4);
    let angular = GaussLegendre::new(8);
    let panel = |a: f64, b: f64| -> (f64, f64) {
        let mut val = 0.0;
        let mut abs = 0.0;
        for (&tau, &wt) in angular.nodes.iter().zip(&angular.weights) {
            let s = a + tau * (b - a);
            let offset = curve.arc_chord_offset(arc, s);
            let jac = curve.cap_ray_jacobian(arc, s);
            for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
                let g = wt * wr * r * jac * f(mid + r * offset);
                val += g;
                abs += g.abs();
            }
        }
        (val * (b - a), abs * (b - a))
    };
    struct Ctx<'a> {
        panel: &'a dyn Fn(f64, f64) -> (f64, f64),
        floor: f64,
    }
    fn refine(
        ctx: &Ctx,
        a: f64,
        b: f64,
        whole: (f64, f64),
        parent_diff: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let left = (ctx.panel)(a, m);
        let right = (ctx.panel)(m, b);
        let halves = left.0 + right.0;
        let scale = left.1 + right.1 + ctx.floor * (b - a);
        let diff = (halves - whole.0).abs();
        if diff <= ARC_REL_TOL * scale {
            return Ok(halves);
        }
        // a smooth integrand gains many digits per bisection; no progress
        // means the integrand's own rounding noise has been reached
        if depth >= 2 && diff > 0.25 * parent_diff && diff <= ARC_NOISE_TOL * scale {
            return Ok(halves);
        }
        if depth >= MAX_ARC_LEVELS {
            return Err(Error::Quadrature { levels: depth });
        }
        Ok(refine(ctx, a, m, left, diff, depth + 1)? + refine(ctx, m, b, right, diff, depth + 1)?)
    }
    let ctx = Ctx {
        panel: &panel,
        floor,
    };
    refine(&ctx, 0.0, 1.0, panel(0.0, 1.0), f64::INFINITY, 0)
}

/// Integral of `f` over `T ∩ Ω^side` with the default degree-5 rule.
pub fn integrate_cut_region(
    iface: &Interface,
    elem: &CutElement,
    side: Side,
    f: impl Fn(Vec2) -> f64,
) -> Result<f64> {
    integrate_cut_region_with(iface, elem, side, &TriangleRule::degree5(), f)
}

/// Integral of `f` over `T ∩ Ω^side`: straight pieces with `rule`, the curved
/// cap by adaptive Gauss quadrature along the arc.
pub fn integrate_cut_region_with(
    iface: &Interface,
    elem: &CutElement,
    side: Side,
    rule: &TriangleRule,
    f: impl Fn(Vec2) -> f64,
) -> Result<f64> {
    integrate_region(iface, elem, side, RegionRule::Curved, rule, f)
}

/// Integral of `f` over the side-`side` part of `elem` as split by `regions`.
pub fn integrate_region(
    iface: &Interface,
    elem: &CutElement,
    side: Side,
    regions: RegionRule,
    rule: &TriangleRule,
    f: impl Fn(Vec2) -> f64,
) -> Result<f64> {
    integrate_region_floored(iface, elem, side, regions, rule, 0.0, f)
}

/// [`integrate_cut_region`] for integrands that may sit at rounding level:
/// the arc refinement stops once panels agree to `1e-12 * abs_floor`, where
/// `abs_floor` is a magnitude the caller does not need resolved beyond.
pub fn integrate_cut_region_floored(
    iface: &Interface,
    elem: &CutElement,
    side: Side,
    abs_floor: f64,
    f: impl Fn(Vec2) -> f64,
) -> Result<f64> {
    let rule = TriangleRule::degree5();
    integrate_region_floored(iface, elem, side, RegionRule::Curved, &rule, abs_floor, f)
}

fn integrate_region_floored(
    iface: &Interface,
    elem: &CutElement,
    side: Side,
    regions: RegionRule,
    rule: &TriangleRule,
    abs_floor: f64,
    f: impl Fn(Vec2) -> f64,
) -> Result<f64> {
    let [a, b, c] = elem.vertices;
    let Some(cut) = &elem.cut else {
        return Ok(if elem.class.side() == Some(side) {
            rule.integrate([a, b, c], &f)
        } else {
            0.0
        });
    };
    let v = elem.vertices;
    let l = cut.lone;
    let (p1, p2) = (cut.crossings[0].point, cut.crossings[1].point);
    let (pieces, sign): (Vec<[Vec2; 3]>, f64) = if elem.vertex_sides[l] == side {
        (vec![[v[l], p1, p2]], cut.cap_sign)
    } else {
        let v1 = v[(l + 1) % 3];
        let v2 = v[(l + 2) % 3];
        (vec![[p1, v1, v2], [p1, v2, p2]], -cut.cap_sign)
    };
    let straight: f64 = pieces.iter().map(|&t| rule.integrate(t, &f)).sum();
    if regions == RegionRule::Chord {
        return Ok(straight);
    }
    let floor: f64 = pieces
        .iter()
        .map(|&t| rule.integrate(t, |x| f(x).abs()))
        .sum::<f64>()
        + abs_floor;
    let cap = cap_integral(iface.curve(), &cut.arc, p1, p2, floor, &f)?;
    Ok(straight + sign * cap)
}

/// Runtime checks of the geometric lemmas used by the stability analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryDiagnostics {
    pub n_cut: usize,
    /// Largest `|T_Γ| / |p1 - p2|` over cut cells with chord at most the radius.
    pub max_arc_chord_ratio: f64,
    /// Largest `|T_Γ| / max_i |e_i^s|` per side.
    pub max_arc_over_subedge: [f64; 2],
    /// Largest `|e^s|^2 / max(|T1^s|, |T2^s|)` over interior interface edges.
    pub theta: f64,
    /// Every cut cell has two crossings on two distinct edges.
    pub two_crossings: bool,
}

pub fn geometry_diagnostics(
    mesh: &TriMesh,
    iface: &Interface,
    geo: &CutGeometry,
) -> GeometryDiagnostics {
    let radius_proxy = 1.0 / iface.curve().max_curvature();
    let mut max_arc_chord_ratio: f64 = 0.0;
    let mut max_arc_over_subedge = [0.0f64; 2];
    let mut two_crossings = true;
    for &c in &geo.cut_cells {
        let elem = &geo.elements[c];
        let cut = elem.cut.as_ref().expect("cut");
        let chord = (cut.crossings[0].point - cut.crossings[1].point).norm();
        if chord <= radius_proxy {
            max_arc_chord_ratio = max_arc_chord_ratio.max(cut.arc_length / chord);
        }
        for s in Side::BOTH {
            let longest = elem
                .edge_lengths
                .iter()
                .map(|l| l[s.index()])
                .fold(0.0, f64::max);
            max_arc_over_subedge[s.index()] =
                max_arc_over_subedge[s.index()].max(cut.arc_length / longest);
        }
        two_crossings &= cut.crossings[0].local_edge != cut.crossings[1].local_edge;
    }
    let mut theta: f64 = 0.0;
    for &e in &geo.interface_edges {
        let (t1, Some(t2)) = mesh.edge_patch(e) else {
            continue;
        };
        for s in Side::BOTH {
            let len = geo.edge_splits[e].length(s);
            if len == 0.0 {
                continue;
            }
            let big = geo.elements[t1].area[s.index()].max(geo.elements[t2].area[s.index()]);
            theta = theta.max(if big > 0.0 {
                len * len / big
            } else {
                f64::INFINITY
            });
        }
    }
    GeometryDiagnostics {
        n_cut: geo.cut_cells.len(),
        max_arc_chord_ratio,
        max_arc_over_subedge,
        theta,
        two_crossings,
    }
}
