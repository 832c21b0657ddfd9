//! Problem data and the local contributions of the bilinear forms.
//!
//! All variants share the volume term and the symmetric consistency term on
//! the edges of cut cells. They differ in the weights of the value-jump
//! penalty and in the kind of gradient-jump stabilization:
//!
//! | variant | value penalty       | gradient stabilization          |
//! |---------|---------------------|---------------------------------|
//! | Main    | `γ ρ^s / |e^s|`     | normal jump, `ρ^s |e^s|`         |
//! | E2      | `γ ρ^s / |e|`       | none                            |
//! | E4      | `γ ρ^s / |e^s|`     | none                            |
//! | E5      | `γ ρ^s / |e^s|`     | normal jump, `γ_F ρ^s |e|`       |
//! | E3      | `γ ρ^s / |e|`       | full gradient jump, `γ_F ρ^s |e|`|
//!
//! On a sub-edge `e^s` each adjacent cell contributes the trace of its
//! `s`-branch. Jumps are oriented by the lower-indexed cell `T1`:
//! `[w] = (w1 - w2) n1`.

use std::fmt::Debug;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Side, Vec2};
use crate::ife::IfeBasis;
use crate::interface::{integrate_region, CutElement, CutGeometry, Interface, RegionRule};
use crate::mesh::TriMesh;
use crate::quadrature::TriangleRule;

/// Piecewise constant diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diffusion {
    pub minus: f64,
    pub plus: f64,
}

impl Diffusion {
    pub fn new(minus: f64, plus: f64) -> Result<Self> {
        if !(minus > 0.0) || !(plus > 0.0) || !minus.is_finite() || !plus.is_finite() {
            return Err(Error::Parameter(format!(
                "diffusion coefficients must be positive and finite, got ρ- = {minus}, ρ+ = {plus}"
            )));
        }
        Ok(Self { minus, plus })
    }

    pub fn of(&self, side: Side) -> f64 {
        match side {
            Side::Minus => self.minus,
            Side::Plus => self.plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Main,
    E2,
    E4,
    E5,
    E3,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Main, Method::E2, Method::E4, Method::E5, Method::E3];

    pub fn name(self) -> &'static str {
        match self {
            Method::Main => "main",
            Method::E2 => "e2",
            Method::E4 => "e4",
            Method::E5 => "e5",
            Method::E3 => "e3",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method '{s}' (expected main, e2, e3, e4 or e5)"
                ))
            })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A bilinear form together with its penalty parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodVariant {
    pub method: Method,
    pub gamma: f64,
    /// Only read by E5 and E3.
    pub gamma_f: f64,
}

impl MethodVariant {
    pub fn new(method: Method, gamma: f64, gamma_f: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Parameter(format!("γ must be positive, got {gamma}")));
        }
        if matches!(method, Method::E5 | Method::E3) && (!(gamma_f > 0.0) || !gamma_f.is_finite()) {
            return Err(Error::Parameter(format!(
                "γ_F must be positive, got {gamma_f}"
            )));
        }
        Ok(Self {
            method,
            gamma,
            gamma_f,
        })
    }

    /// Value-penalty weight on a sub-edge of length `sub` inside an edge of
    /// length `full`.
    fn penalty(&self, rho: f64, sub: f64, full: f64) -> f64 {
        match self.method {
            Method::Main | Method::E4 | Method::E5 => self.gamma * rho / sub,
            Method::E2 | Method::E3 => self.gamma * rho / full,
        }
    }

    /// Weight of the gradient-jump term, if any, and whether it uses the full
    /// gradient.
    fn stabilization(&self, rho: f64, sub: f64, full: f64) -> Option<(f64, bool)> {
        match self.method {
            Method::Main => Some((rho * sub, false)),
            Method::E5 => Some((self.gamma_f * rho * full, false)),
            Method::E3 => Some((self.gamma_f * rho * full, true)),
            Method::E2 | Method::E4 => None,
        }
    }
}

/// Piecewise smooth reference solution with its source term.
pub trait ExactSolution: Send + Sync + Debug {
    fn value(&self, x: Vec2, side: Side) -> f64;
    fn gradient(&self, x: Vec2, side: Side) -> Vec2;
    /// `f = -div(ρ ∇u)` on the given side.
    fn source(&self, x: Vec2, side: Side) -> f64;
    /// The source on `side` when it is constant.
    fn constant_source(&self, _side: Side) -> Option<f64> {
        None
    }
}

/// `u = R^α / ρ_in` inside a circle of radius `r0`, and
/// `u = R^α / ρ_out + r0^α (1/ρ_in - 1/ρ_out)` outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPower {
    pub center: Vec2,
    pub r0: f64,
    pub alpha: f64,
    pub rho: Diffusion,
    /// Side inside the circle.
    pub inclusion: Side,
}

impl RadialPower {
    fn rho_in_out(&self, side: Side) -> (f64, f64, bool) {
        let inner = side == self.inclusion;
        let rho_in = self.rho.of(self.inclusion);
        let rho_out = self.rho.of(self.inclusion.opposite());
        (rho_in, rho_out, inner)
    }
}

impl ExactSolution for RadialPower {
    fn value(&self, x: Vec2, side: Side) -> f64 {
        let r = (x - self.center).norm();
        let (rho_in, rho_out, inner) = self.rho_in_out(side);
        if inner {
            r.powf(self.alpha) / rho_in
        } else {
            r.powf(self.alpha) / rho_out + self.r0.powf(self.alpha) * (1.0 / rho_in - 1.0 / rho_out)
        }
    }

    fn gradient(&self, x: Vec2, side: Side) -> Vec2 {
        let d = x - self.center;
        let r = d.norm();
        if r == 0.0 {
            return Vec2::zeros();
        }
        let (rho_in, rho_out, inner) = self.rho_in_out(side);
        let rho = if inner { rho_in } else { rho_out };
        self.alpha * r.powf(self.alpha - 2.0) / rho * d
    }

    fn source(&self, x: Vec2, _side: Side) -> f64 {
        let r = (x - self.center).norm();
        -self.alpha * self.alpha * r.powf(self.alpha - 2.0)
    }

    fn constant_source(&self, _side: Side) -> Option<f64> {
        (self.alpha == 2.0).then_some(-4.0)
    }
}

/// Globally affine `u = value + gradient · x`, source zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub value: f64,
    pub gradient: Vec2,
}

impl ExactSolution for Affine {
    fn value(&self, x: Vec2, _side: Side) -> f64 {
        self.value + self.gradient.dot(&x)
    }

    fn gradient(&self, _x: Vec2, _side: Side) -> Vec2 {
        self.gradient
    }

    fn source(&self, _x: Vec2, _side: Side) -> f64 {
        0.0
    }

    fn constant_source(&self, _side: Side) -> Option<f64> {
        Some(0.0)
    }
}

/// Coefficients, interface and reference solution of one interface problem.
/// Dirichlet data is the trace of the reference solution.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub rho: Diffusion,
    pub interface: Interface,
    pub solution: Arc<dyn ExactSolution>,
}

impl ProblemSpec {
    /// Checks the transmission conditions of the reference solution at
    /// points of the interface.
    pub fn validate(&self) -> Result<()> {
        Diffusion::new(self.rho.minus, self.rho.plus)?;
        if self.rho.plus < self.rho.minus {
            return Err(Error::Parameter(format!(
                "expected ρ+ >= ρ-, got ρ- = {}, ρ+ = {}",
                self.rho.minus, self.rho.plus
            )));
        }
        let curve = self.interface.curve();
        let (lo, hi) = curve.bounding_box();
        let c = 0.5 * (lo + hi);
        let r = 0.5 * (hi - lo).norm();
        for k in 0..16 {
            let t = std::f64::consts::TAU * (k as f64 + 0.3) / 16.0;
            let y = c + r * Vec2::new(t.cos(), t.sin());
            let x = y - curve.signed_distance(y) * curve.outward_normal(y);
            let n = self.interface.normal_out_of_plus(x);
            let (um, up) = (
                self.solution.value(x, Side::Minus),
                self.solution.value(x, Side::Plus),
            );
            let fm = self.rho.minus * self.solution.gradient(x, Side::Minus).dot(&n);
            let fp = self.rho.plus * self.solution.gradient(x, Side::Plus).dot(&n);
            let vscale = um.abs().max(up.abs()).max(1.0);
            let fscale = fm.abs().max(fp.abs()).max(1.0);
            if (um - up).abs() > 1e-10 * vscale || (fm - fp).abs() > 1e-10 * fscale {
                return Err(Error::Parameter(format!(
                    "reference solution violates the transmission conditions at ({}, {}): \
                     value jump {:e}, flux jump {:e}",
                    x.x,
                    x.y,
                    um - up,
                    fm - fp
                )));
            }
        }
        Ok(())
    }
}

/// The radial test problem: circle of radius `r0` at the origin enclosing the
/// minus side, `u^- = R^α/ρ-`, `u^+ = R^α/ρ+ + r0^α (1/ρ- - 1/ρ+)`.
pub fn exact_solution_case1(
    rho_minus: f64,
    rho_plus: f64,
    alpha: f64,
    r0: f64,
) -> Result<ProblemSpec> {
    radial_problem(rho_minus, rho_plus, alpha, r0, Side::Minus)
}

/// Radial problem with a chosen inclusion side.
pub fn radial_problem(
    rho_minus: f64,
    rho_plus: f64,
    alpha: f64,
    r0: f64,
    inclusion: Side,
) -> Result<ProblemSpec> {
    let rho = Diffusion::new(rho_minus, rho_plus)?;
    if !(alpha >= 1.0) {
        return Err(Error::Parameter(format!(
            "α must be at least 1, got {alpha}"
        )));
    }
    let center = Vec2::zeros();
    let interface = Interface::circle(center, r0)?.with_inclusion(inclusion);
    Ok(ProblemSpec {
        rho,
        interface,
        solution: Arc::new(RadialPower {
            center,
            r0,
            alpha,
            rho,
            inclusion,
        }),
    })
}

/// Element stiffness `Σ_s ρ^s |T^s| g_i^s · g_j^s` with sub-regions from
/// `regions`.
pub fn volume_term(
    elem: &CutElement,
    basis: &IfeBasis,
    rho: Diffusion,
    regions: RegionRule,
) -> [[f64; 3]; 3] {
    let (areas, _) = elem.measures(regions);
    let mut k = [[0.0; 3]; 3];
    for s in Side::BOTH {
        let area = areas[s.index()];
        if area == 0.0 {
            continue;
        }
        let w = rho.of(s) * area;
        let g = basis.gradients(s);
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] += w * g[i].dot(&g[j]);
            }
        }
    }
    k
}

/// Load `Σ_s ∫_{T^s} f^s w_i^s` with sub-regions from `regions`.
pub fn load_vector(
    iface: &Interface,
    elem: &CutElement,
    basis: &IfeBasis,
    solution: &dyn ExactSolution,
    regions: RegionRule,
) -> Result<[f64; 3]> {
    let (areas, centroids) = elem.measures(regions);
    let rule = TriangleRule::degree5();
    let mut out = [0.0; 3];
    for s in Side::BOTH {
        let area = areas[s.index()];
        if area == 0.0 {
            continue;
        }
        match solution.constant_source(s) {
            Some(f) => {
                // the branch is linear, so its mean is its value at the centroid
                let v = basis.values(centroids[s.index()], s);
                for i in 0..3 {
                    out[i] += f * area * v[i];
                }
            }
            None => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += integrate_region(iface, elem, s, regions, &rule, |x| {
                        solution.source(x, s) * basis.values(x, s)[i]
                    })?;
                }
            }
        }
    }
    Ok(out)
}

/// Most DOFs two cells sharing an edge can carry: 4 when the edge's
/// endpoints are shared, 6 when both cells own their nodal values.
pub const EDGE_DOFS: usize = 6;

/// Gauss points on `[0, 1]` for the two-point rule.
const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Traces of the local basis functions of both cells at one quadrature point
/// of a sub-edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub x: Vec2,
    pub weight: f64,
    /// `w1 - w2` per patch DOF.
    pub jump: [f64; EDGE_DOFS],
    /// `(∇w1 + ∇w2)/2 · n1` per patch DOF.
    pub mean_normal: [f64; EDGE_DOFS],
}

/// One side's part of an edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SubEdge {
    pub side: Side,
    pub length: f64,
    pub points: [TracePoint; 2],
    /// `(∇w1 - ∇w2) · n1` per patch DOF, constant along the sub-edge.
    pub normal_jump: [f64; EDGE_DOFS],
    /// `∇w1 - ∇w2` per patch DOF.
    pub gradient_jump: [Vec2; EDGE_DOFS],
}

/// Traces of the basis functions of the two cells sharing an edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTraces {
    pub edge: usize,
    pub length: f64,
    /// Outward normal of the lower-indexed cell.
    pub normal: Vec2,
    /// Global DOFs of the patch; unused slots hold `usize::MAX`.
    pub dofs: [usize; EDGE_DOFS],
    pub n_dofs: usize,
    pub sub_edges: Vec<SubEdge>,
}

/// Traces on an interior edge; `None` for boundary edges.
pub fn edge_traces(
    mesh: &TriMesh,
    geo: &CutGeometry,
    bases: &[IfeBasis],
    cell_dofs: &[[usize; 3]],
    edge: usize,
) -> Option<EdgeTraces> {
    let (t1, Some(t2)) = mesh.edge_patch(edge) else {
        return None;
    };
    Some(edge_traces_oriented(
        mesh, geo, bases, cell_dofs, edge, t1, t2,
    ))
}

/// Like [`edge_traces`] but with an explicit choice of the first cell.
pub fn edge_traces_oriented(
    mesh: &TriMesh,
    geo: &CutGeometry,
    bases: &[IfeBasis],
    cell_dofs: &[[usize; 3]],
    edge: usize,
    t1: usize,
    t2: usize,
) -> EdgeTraces {
    let mut dofs = [usize::MAX; EDGE_DOFS];
    let mut n_dofs = 0;
    let mut slot = |v: usize| -> usize {
        if let Some(k) = dofs[..n_dofs].iter().position(|&d| d == v) {
            return k;
        }
        dofs[n_dofs] = v;
        n_dofs += 1;
        n_dofs - 1
    };
    let map1 = cell_dofs[t1].map(&mut slot);
    let map2 = cell_dofs[t2].map(&mut slot);
    let n1 = mesh.outward_normal(t1, edge);
    let [va, vb] = mesh.edges[edge].vertices;
    let length = (mesh.vertices[vb] - mesh.vertices[va]).norm();
    let (b1, b2) = (&bases[t1], &bases[t2]);

    let mut sub_edges = Vec::with_capacity(2);
    for s in Side::BOTH {
        let Some((a, b)) = geo.edge_splits[edge].segments[s.index()] else {
            continue;
        };
        let sub = (b - a).norm();
        if sub == 0.0 {
            continue;
        }
        let (g1, g2) = (b1.gradients(s), b2.gradients(s));
        let mut normal_jump = [0.0; EDGE_DOFS];
        let mut gradient_jump = [Vec2::zeros(); EDGE_DOFS];
        let mut mean_grad = [Vec2::zeros(); EDGE_DOFS];
        for i in 0..3 {
            gradient_jump[map1[i]] += g1[i];
            gradient_jump[map2[i]] -= g2[i];
            mean_grad[map1[i]] += 0.5 * g1[i];
            mean_grad[map2[i]] += 0.5 * g2[i];
        }
        for k in 0..EDGE_DOFS {
            normal_jump[k] = gradient_jump[k].dot(&n1);
        }
        let mean_normal = mean_grad.map(|g| g.dot(&n1));
        let points = GAUSS2.map(|t| {
            let x = a + t * (b - a);
            let (w1, w2) = (b1.values(x, s), b2.values(x, s));
            let mut jump = [0.0; EDGE_DOFS];
            for i in 0..3 {
                jump[map1[i]] += w1[i];
                jump[map2[i]] -= w2[i];
            }
            TracePoint {
                x,
                weight: 0.5 * sub,
                jump,
                mean_normal,
            }
        });
        sub_edges.push(SubEdge {
            side: s,
            length: sub,
            points,
            normal_jump,
            gradient_jump,
        });
    }
    EdgeTraces {
        edge,
        length,
        normal: n1,
        dofs,
        n_dofs,
        sub_edges,
    }
}

/// Edge contribution of the form over the patch DOFs of `traces`.
pub fn edge_terms(
    traces: &EdgeTraces,
    rho: Diffusion,
    variant: &MethodVariant,
) -> [[f64; EDGE_DOFS]; EDGE_DOFS] {
    let mut m = [[0.0; EDGE_DOFS]; EDGE_DOFS];
    let n = traces.n_dofs;
    for se in &traces.sub_edges {
        let r = rho.of(se.side);
        let pen = variant.penalty(r, se.length, traces.length);
        for q in &se.points {
            for i in 0..n {
                for j in 0..n {
                    let consistency =
                        r * (q.mean_normal[i] * q.jump[j] + q.mean_normal[j] * q.jump[i]);
                    m[i][j] += q.weight * (pen * q.jump[i] * q.jump[j] - consistency);
                }
            }
        }
        if let Some((w, full)) = variant.stabilization(r, se.length, traces.length) {
            for i in 0..n {
                for j in 0..n {
                    let prod = if full {
                        se.gradient_jump[i].dot(&se.gradient_jump[j])
                    } else {
                        se.normal_jump[i] * se.normal_jump[j]
                    };
                    m[i][j] += w * se.length * prod;
                }
            }
        }
    }
    m
}
