//! Independent oracles shared by the integration tests: circle geometry by
//! the quadratic formula, sub-regions by polygon clipping, cut-cell bases by
//! dense elimination with full pivoting, and a naive dense assembly.

#![allow(dead_code)]

use hcife::assembly::Discretization;
use hcife::forms::Method;
use hcife::interface::RegionRule;
use hcife::mesh::{Edge, TriMesh};
use hcife::{Side, Vec2};

pub const R0: f64 = 1.0 / 3.0;
/// Segments of the polygon standing in for the circle.
pub const CLIP_SEGMENTS: usize = 1 << 14;

pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// A mesh made of the single counterclockwise triangle `v`.
pub fn one_cell_mesh(v: [Vec2; 3]) -> TriMesh {
    let diam = (0..3)
        .map(|k| (v[k] - v[(k + 1) % 3]).norm())
        .fold(0.0, f64::max);
    let edges = (0..3)
        .map(|k| {
            let (p, q) = (k, (k + 1) % 3);
            Edge {
                vertices: [p.min(q), p.max(q)],
                cells: [0, usize::MAX],
                n_cells: 1,
            }
        })
        .collect();
    TriMesh {
        level: 0,
        n: 1,
        h: diam,
        vertices: v.to_vec(),
        cells: vec![[0, 1, 2]],
        edges,
        cell_edges: vec![[0, 1, 2]],
        boundary_vertex: vec![true; 3],
    }
}

pub fn reference_cell() -> [Vec2; 3] {
    [
        Vec2::new(0.3, 0.0),
        Vec2::new(0.4, 0.0),
        Vec2::new(0.3, 0.1),
    ]
}

/// Parameters in `(0, 1)` where segment `a b` meets the circle `|x| = r`.
pub fn segment_roots(a: Vec2, b: Vec2, r: f64) -> Vec<f64> {
    let d = b - a;
    let (qa, qb, qc) = (d.dot(&d), 2.0 * a.dot(&d), a.dot(&a) - r * r);
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    let mut t: Vec<f64> = [(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)]
        .into_iter()
        .filter(|t| *t > 0.0 && *t < 1.0)
        .collect();
    t.sort_by(f64::total_cmp);
    t
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(&d) / d.dot(&d)).clamp(0.0, 1.0);
    (a + t * d - p).norm()
}

/// Whether the circle `|x| = r` passes through the triangle.
pub fn triangle_is_cut(v: [Vec2; 3], r: f64) -> bool {
    let far = v.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let inside_origin = (0..3).all(|k| cross(v[(k + 1) % 3] - v[k], -v[k]) >= 0.0);
    let near = if inside_origin {
        0.0
    } else {
        (0..3)
            .map(|k| point_segment_distance(Vec2::zeros(), v[k], v[(k + 1) % 3]))
            .fold(f64::INFINITY, f64::min)
    };
    near < r && r < far
}

/// Sutherland-Hodgman: the part of `poly` left of the directed line `a -> b`.
pub fn clip(poly: &[Vec2], a: Vec2, b: Vec2) -> Vec<Vec2> {
    let side = |p: Vec2| cross(b - a, p - a);
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
        let (sp, sq) = (side(p), side(q));
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            out.push(p + sp / (sp - sq) * (q - p));
        }
    }
    out
}

/// Area and first moment of a simple polygon.
pub fn moments(poly: &[Vec2]) -> (f64, Vec2) {
    let mut a = 0.0;
    let mut m = Vec2::zeros();
    for k in 0..poly.len() {
        let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
        let c = cross(p, q);
        a += 0.5 * c;
        m += c / 6.0 * (p + q);
    }
    (a, m)
}

/// Vertices of a regular polygon with the area of the disk of radius `r`.
pub fn disk_polygon(r: f64, n: usize) -> Vec<Vec2> {
    let step = std::f64::consts::TAU / n as f64;
    let rr = r * (step / step.sin()).sqrt();
    (0..n)
        .map(|k| {
            let t = k as f64 * step;
            rr * Vec2::new(t.cos(), t.sin())
        })
        .collect()
}

/// `(area, centroid)` of the parts of a triangle inside and outside the
/// polygon `disk`, by clipping.
pub fn clipped_parts(v: [Vec2; 3], disk: &[Vec2]) -> [(f64, Vec2); 2] {
    let mut poly = v.to_vec();
    for k in 0..disk.len() {
        let (a, b) = (disk[k], disk[(k + 1) % disk.len()]);
        if poly.iter().all(|&p| cross(b - a, p - a) >= 0.0) {
            continue;
        }
        poly = clip(&poly, a, b);
        if poly.is_empty() {
            break;
        }
    }
    let (ai, mi) = if poly.len() >= 3 {
        moments(&poly)
    } else {
        (0.0, Vec2::zeros())
    };
    let (at, mt) = moments(&v);
    let centroid = |a: f64, m: Vec2| if a > 0.0 { m / a } else { Vec2::zeros() };
    [
        (ai, centroid(ai, mi)),
        (at - ai, centroid(at - ai, mt - mi)),
    ]
}

/// Crossings of the circle with a cut triangle's boundary.
pub fn crossings(v: [Vec2; 3], r: f64) -> Vec<Vec2> {
    let mut out = Vec::new();
    for k in 0..3 {
        let (a, b) = (v[k], v[(k + 1) % 3]);
        for t in segment_roots(a, b, r) {
            out.push(a + t * (b - a));
        }
    }
    out
}

/// `(area, centroid)` of the inside and outside parts when the triangle is
/// split by the chord joining its two crossings.
pub fn chord_parts(v: [Vec2; 3], r: f64) -> [(f64, Vec2); 2] {
    let c = crossings(v, r);
    assert_eq!(c.len(), 2);
    let left = clip(&v, c[0], c[1]);
    let right = clip(&v, c[1], c[0]);
    let (la, lm) = moments(&left);
    let (ra, rm) = moments(&right);
    // the piece holding inside vertices is the inside piece
    let inside_left = v
        .iter()
        .filter(|p| p.norm() < r)
        .all(|&p| cross(c[1] - c[0], p - c[0]) > 0.0);
    let (l, rr) = ((la, lm / la), (ra, rm / ra));
    if inside_left {
        [l, rr]
    } else {
        [rr, l]
    }
}

/// Solves `a x = b` by Gaussian elimination with full pivoting.
pub fn solve_full_pivot(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, 0.0);
        for i in k..n {
            for j in k..n {
                if a[i][j].abs() > best {
                    (pi, pj, best) = (i, j, a[i][j].abs());
                }
            }
        }
        assert!(best > 0.0, "singular matrix");
        a.swap(k, pi);
        b.swap(k, pi);
        for row in a.iter_mut() {
            row.swap(k, pj);
        }
        perm.swap(k, pj);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut y = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * y[j]).sum();
        y[k] = (b[k] - s) / a[k][k];
    }
    let mut x = vec![0.0; n];
    for k in 0..n {
        x[perm[k]] = y[k];
    }
    x
}

/// One branch `value + gradient · (x - origin)`.
#[derive(Debug, Clone, Copy)]
pub struct Branch {
    pub origin: Vec2,
    pub value: f64,
    pub gradient: Vec2,
}

impl Branch {
    pub fn at(&self, x: Vec2) -> f64 {
        self.value + self.gradient.dot(&(x - self.origin))
    }
}

/// Local basis of a cell: `branches[i][side]`.
#[derive(Debug, Clone)]
pub struct OracleBasis {
    pub branches: [[Branch; 2]; 3],
}

fn hats(v: [Vec2; 3]) -> [Branch; 3] {
    let area2 = cross(v[1] - v[0], v[2] - v[0]);
    std::array::from_fn(|i| {
        let (p, q) = (v[(i + 1) % 3], v[(i + 2) % 3]);
        // the hat of vertex i vanishes on the opposite edge p q
        let g = Vec2::new(p.y - q.y, q.x - p.x) / area2;
        Branch {
            origin: v[i],
            value: 1.0,
            gradient: g,
        }
    })
}

/// The coupled basis of a triangle cut by the circle `|x| = r` centered at
/// the origin, with the inside on the minus side: nodal values at the
/// vertices and value, tangential derivative and flux continuity at the arc
/// midpoint.
pub fn oracle_basis(v: [Vec2; 3], r: f64, rho_minus: f64, rho_plus: f64) -> OracleBasis {
    if !triangle_is_cut(v, r) {
        let h = hats(v);
        return OracleBasis {
            branches: h.map(|b| [b, b]),
        };
    }
    let c = crossings(v, r);
    assert_eq!(c.len(), 2);
    let x0 = r * (c[0] + c[1]).normalize();
    let n0 = x0 / r;
    let t0 = Vec2::new(-n0.y, n0.x);
    // unknowns: (value, gx, gy) of the minus branch, then of the plus branch
    let mut a = vec![vec![0.0; 6]; 6];
    for j in 0..3 {
        let off = if v[j].norm() < r { 0 } else { 3 };
        let d = v[j] - x0;
        a[j][off] = 1.0;
        a[j][off + 1] = d.x;
        a[j][off + 2] = d.y;
    }
    a[3][0] = 1.0;
    a[3][3] = -1.0;
    a[4][1] = t0.x;
    a[4][2] = t0.y;
    a[4][4] = -t0.x;
    a[4][5] = -t0.y;
    a[5][1] = rho_minus * n0.x;
    a[5][2] = rho_minus * n0.y;
    a[5][4] = -rho_plus * n0.x;
    a[5][5] = -rho_plus * n0.y;
    let branches = std::array::from_fn(|i| {
        let mut b = vec![0.0; 6];
        b[i] = 1.0;
        let x = solve_full_pivot(a.clone(), b);
        let br = |o: usize| Branch {
            origin: x0,
            value: x[o],
            gradient: Vec2::new(x[o + 1], x[o + 2]),
        };
        [br(0), br(3)]
    });
    OracleBasis { branches }
}

/// Gauss-Legendre two-point nodes on `[0, 1]`.
const G2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Dense matrix and load vector of `disc` for the radial problem with
/// `α = 2` (source `-4`), assembled term by term from the definitions.
pub fn dense_oracle(
    disc: &Discretization,
    method: Method,
    gamma: f64,
    gamma_f: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mesh = &disc.mesh;
    let (rm, rp) = (disc.problem.rho.minus, disc.problem.rho.plus);
    let rho = |s: Side| if s == Side::Minus { rm } else { rp };
    let n = disc.n_dofs();
    let mut a = vec![vec![0.0; n]; n];
    let mut f = vec![0.0; n];
    let disk = disk_polygon(R0, CLIP_SEGMENTS);
    let cells: Vec<[Vec2; 3]> = (0..mesh.n_cells())
        .map(|c| mesh.cells[c].map(|v| mesh.vertices[v]))
        .collect();
    let cut: Vec<bool> = cells.iter().map(|&v| triangle_is_cut(v, R0)).collect();
    let bases: Vec<OracleBasis> = cells.iter().map(|&v| oracle_basis(v, R0, rm, rp)).collect();
    let dofs = &disc.dofs.cell_dofs;

    for (c, &v) in cells.iter().enumerate() {
        let parts = if !cut[c] {
            let (at, mt) = moments(&v);
            let whole = (at, mt / at);
            if v.iter().map(|p| p.norm()).fold(0.0, f64::max) < R0 {
                [whole, (0.0, Vec2::zeros())]
            } else {
                [(0.0, Vec2::zeros()), whole]
            }
        } else {
            match disc.options.regions {
                RegionRule::Curved => clipped_parts(v, &disk),
                RegionRule::Chord => chord_parts(v, R0),
            }
        };
        for s in Side::BOTH {
            let (area, centroid) = parts[s.index()];
            if area == 0.0 {
                continue;
            }
            for i in 0..3 {
                let bi = bases[c].branches[i][s.index()];
                f[dofs[c][i]] += -4.0 * area * bi.at(centroid);
                for j in 0..3 {
                    let bj = bases[c].branches[j][s.index()];
                    a[dofs[c][i]][dofs[c][j]] += rho(s) * area * bi.gradient.dot(&bj.gradient);
                }
            }
        }
    }

    for edge in &mesh.edges {
        if edge.n_cells < 2 {
            continue;
        }
        let [t1, t2] = edge.cells;
        if !(cut[t1] || cut[t2]) {
            continue;
        }
        let (pa, pb) = (
            mesh.vertices[edge.vertices[0]],
            mesh.vertices[edge.vertices[1]],
        );
        let len = (pb - pa).norm();
        let third = cells[t1]
            .iter()
            .copied()
            .find(|p| *p != pa && *p != pb)
            .unwrap();
        let mut normal = Vec2::new(pb.y - pa.y, pa.x - pb.x) / len;
        if normal.dot(&(third - pa)) > 0.0 {
            normal = -normal;
        }
        let mut cuts = vec![0.0];
        cuts.extend(segment_roots(pa, pb, R0));
        cuts.push(1.0);
        let mut patch: Vec<usize> = dofs[t1].iter().chain(&dofs[t2]).copied().collect();
        patch.sort_unstable();
        patch.dedup();
        // branch of global DOF g restricted to cell t on side s
        let trace = |g: usize, t: usize, s: Side| -> (Branch, bool) {
            match dofs[t].iter().position(|&d| d == g) {
                Some(k) => (bases[t].branches[k][s.index()], true),
                None => (
                    Branch {
                        origin: Vec2::zeros(),
                        value: 0.0,
                        gradient: Vec2::zeros(),
                    },
                    false,
                ),
            }
        };
        for w in cuts.windows(2) {
            let (qa, qb) = (pa + w[0] * (pb - pa), pa + w[1] * (pb - pa));
            let sub = (qb - qa).norm();
            let s = if (0.5 * (qa + qb)).norm() < R0 {
                Side::Minus
            } else {
                Side::Plus
            };
            let r = rho(s);
            let (pen, stab, full) = match method {
                Method::Main => (gamma * r / sub, Some(r * sub), false),
                Method::E4 => (gamma * r / sub, None, false),
                Method::E5 => (gamma * r / sub, Some(gamma_f * r * len), false),
                Method::E2 => (gamma * r / len, None, false),
                Method::E3 => (gamma * r / len, Some(gamma_f * r * len), true),
            };
            let jump = |g: usize, x: Vec2| trace(g, t1, s).0.at(x) - trace(g, t2, s).0.at(x);
            let grad_jump = |g: usize| trace(g, t1, s).0.gradient - trace(g, t2, s).0.gradient;
            let mean_flux = |g: usize| {
                0.5 * (trace(g, t1, s).0.gradient + trace(g, t2, s).0.gradient).dot(&normal)
            };
            const PANELS: usize = 64;
            for p in 0..PANELS {
                for &g in &G2 {
                    let x = qa + (p as f64 + g) / PANELS as f64 * (qb - qa);
                    let wq = 0.5 * sub / PANELS as f64;
                    for &i in &patch {
                        for &j in &patch {
                            let (ji, jj) = (jump(i, x), jump(j, x));
                            let v = pen * ji * jj - r * (mean_flux(i) * jj + mean_flux(j) * ji);
                            a[i][j] += wq * v;
                            if let Some(st) = stab {
                                let prod = if full {
                                    grad_jump(i).dot(&grad_jump(j))
                                } else {
                                    grad_jump(i).dot(&normal) * grad_jump(j).dot(&normal)
                                };
                                a[i][j] += wq * st * prod;
                            }
                        }
                    }
                }
            }
        }
    }
    (a, f)
}

/// `max |x - y| / max |y|` over all entries.
pub fn max_rel(x: impl IntoIterator<Item = f64>, y: impl IntoIterator<Item = f64>) -> f64 {
    let (mut d, mut m) = (0.0f64, 0.0f64);
    for (a, b) in x.into_iter().zip(y) {
        d = d.max((a - b).abs());
        m = m.max(b.abs());
    }
    d / m
}
