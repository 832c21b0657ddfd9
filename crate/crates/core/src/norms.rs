//! Error measures, mesh-dependent norms and convergence orders.
//!
//! Max-norm errors are taken over a finite point set: for uncut cells the
//! vertices and the centroid, for cut cells the vertices (on their own side)
//! and both crossings evaluated on both branches. The interface flux error
//! uses the crossings and the arc midpoint of every cut cell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{CsrMatrix, Discretization, SolveReport};
use crate::error::Result;
use crate::forms::{edge_traces, EDGE_DOFS};
use crate::geometry::{Side, Vec2};
use crate::interface::{integrate_cut_region_floored, CutElement};

/// All error measures of one discrete solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub level: u32,
    pub h: f64,
    pub dofs: usize,
    /// `‖u - u_h‖_{L²}`.
    pub e0: f64,
    /// Max of `|u - u_h|`.
    pub einf: f64,
    /// `‖√ρ ∇(u - u_h)‖_{L²}`.
    pub e1: f64,
    /// Max of `|√ρ ∇(u - u_h)|`.
    pub e1inf: f64,
    /// `‖ρ ∇(u - u_h)‖_{L²}`.
    pub ebar1: f64,
    /// Max of `|ρ ∇(u - u_h)|`.
    pub ebar1inf: f64,
    /// Max of `|ρ ∇(u - u_h)|` over uncut cells only.
    pub etilde1inf: f64,
    /// Max of `|ρ D_n (u - u_h)|` on the interface.
    pub enrm: f64,
    pub solve: SolveReport,
}

impl ErrorReport {
    /// The error columns in table order.
    pub fn columns(&self) -> [f64; 8] {
        [
            self.e0,
            self.einf,
            self.e1,
            self.e1inf,
            self.ebar1,
            self.ebar1inf,
            self.etilde1inf,
            self.enrm,
        ]
    }
}

/// Squared differences below `ROUNDOFF` times the reference magnitude are
/// not resolved by the arc quadrature.
const ROUNDOFF: f64 = 1e-16;

/// `|T^s|` times the largest of `g` over the vertices and centroid of a cell.
fn reference_magnitude(elem: &CutElement, side: Side, g: impl Fn(Vec2) -> f64) -> f64 {
    let c = (elem.vertices[0] + elem.vertices[1] + elem.vertices[2]) / 3.0;
    let peak = elem
        .vertices
        .iter()
        .chain([&c])
        .map(|&x| g(x).abs())
        .fold(0.0, f64::max);
    ROUNDOFF * elem.area[side.index()] * peak
}

/// `‖u - u_h‖_{L²}` with arc-refined quadrature on cut cells.
pub fn l2_error(disc: &Discretization, uh: &[f64]) -> Result<f64> {
    let sol = disc.problem.solution.as_ref();
    let iface = &disc.problem.interface;
    let parts: Vec<f64> = disc
        .geometry
        .elements
        .par_iter()
        .map(|elem| {
            let mut acc = 0.0;
            for s in Side::BOTH {
                if elem.area[s.index()] == 0.0 {
                    continue;
                }
                let floor = reference_magnitude(elem, s, |x| sol.value(x, s).powi(2));
                acc += integrate_cut_region_floored(iface, elem, s, floor, |x| {
                    let d = sol.value(x, s) - disc.eval(uh, elem.cell, x, s);
                    d * d
                })?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum::<f64>().max(0.0).sqrt())
}

/// `(‖√ρ ∇(u - u_h)‖, ‖ρ ∇(u - u_h)‖)`.
pub fn energy_errors(disc: &Discretization, uh: &[f64]) -> Result<(f64, f64)> {
    let sol = disc.problem.solution.as_ref();
    let iface = &disc.problem.interface;
    let rho = disc.problem.rho;
    let parts: Vec<(f64, f64)> = disc
        .geometry
        .elements
        .par_iter()
        .map(|elem| {
            let mut acc = (0.0, 0.0);
            for s in Side::BOTH {
                if elem.area[s.index()] == 0.0 {
                    continue;
                }
                let gh = disc.gradient(uh, elem.cell, s);
                let floor = reference_magnitude(elem, s, |x| sol.gradient(x, s).norm_squared());
                let sq = integrate_cut_region_floored(iface, elem, s, floor, |x| {
                    (sol.gradient(x, s) - gh).norm_squared()
                })?;
                acc.0 += rho.of(s) * sq;
                acc.1 += rho.of(s) * rho.of(s) * sq;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let (a, b) = parts
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Ok((a.sqrt(), b.sqrt()))
}

/// Max-norm errors over the evaluation point set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MaxErrors {
    pub einf: f64,
    pub e1inf: f64,
    pub ebar1inf: f64,
    pub etilde1inf: f64,
    pub enrm: f64,
}

/// Evaluation points of a cell with the branch to use at each.
pub fn evaluation_points(disc: &Discretization, cell: usize) -> Vec<(Vec2, Side)> {
    let elem = &disc.geometry.elements[cell];
    let mut pts: Vec<(Vec2, Side)> = (0..3)
        .map(|k| (elem.vertices[k], elem.vertex_sides[k]))
        .collect();
    match &elem.cut {
        None => {
            let side = elem.class.side().expect("uncut cell has a side");
            pts.push((disc.bases[cell].bary.centroid(), side));
        }
        Some(cut) => {
            for c in &cut.crossings {
                for s in Side::BOTH {
                    pts.push((c.point, s));
                }
            }
        }
    }
    pts
}

pub fn maxnorm_errors(disc: &Discretization, uh: &[f64]) -> MaxErrors {
    let sol = disc.problem.solution.as_ref();
    let rho = disc.problem.rho;
    let parts: Vec<MaxErrors> = (0..disc.mesh.n_cells())
        .into_par_iter()
        .map(|cell| {
            let mut m = MaxErrors::default();
            let cut = disc.geometry.elements[cell].cut.as_ref();
            for (x, s) in evaluation_points(disc, cell) {
                let r = rho.of(s);
                m.einf = m
                    .einf
                    .max((sol.value(x, s) - disc.eval(uh, cell, x, s)).abs());
                let dg = (sol.gradient(x, s) - disc.gradient(uh, cell, s)).norm();
                m.e1inf = m.e1inf.max(r.sqrt() * dg);
                m.ebar1inf = m.ebar1inf.max(r * dg);
                if cut.is_none() {
                    m.etilde1inf = m.etilde1inf.max(r * dg);
                }
            }
            if let Some(cut) = cut {
                let pts = [cut.crossings[0].point, cut.crossings[1].point, cut.x0];
                for x in pts {
                    let n = disc.problem.interface.normal_out_of_plus(x);
                    for s in Side::BOTH {
                        let d = (sol.gradient(x, s) - disc.gradient(uh, cell, s)).dot(&n);
                        m.enrm = m.enrm.max(rho.of(s) * d.abs());
                    }
                }
            }
            m
        })
        .collect();
    parts.iter().fold(MaxErrors::default(), |a, b| MaxErrors {
        einf: a.einf.max(b.einf),
        e1inf: a.e1inf.max(b.e1inf),
        ebar1inf: a.ebar1inf.max(b.ebar1inf),
        etilde1inf: a.etilde1inf.max(b.etilde1inf),
        enrm: a.enrm.max(b.enrm),
    })
}

/// Every error measure of `uh`.
pub fn compute_errors(
    disc: &Discretization,
    uh: &[f64],
    dofs: usize,
    solve: SolveReport,
) -> Result<ErrorReport> {
    let e0 = l2_error(disc, uh)?;
    let (e1, ebar1) = energy_errors(disc, uh)?;
    let m = maxnorm_errors(disc, uh);
    Ok(ErrorReport {
        level: disc.mesh.level,
        h: disc.mesh.h,
        dofs,
        e0,
        einf: m.einf,
        e1,
        e1inf: m.e1inf,
        ebar1,
        ebar1inf: m.ebar1inf,
        etilde1inf: m.etilde1inf,
        enrm: m.enrm,
        solve,
    })
}

/// Squared pieces of the mesh-dependent norms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct NormParts {
    gradient: f64,
    value_jump: f64,
    flux_jump: f64,
    flux_mean: f64,
}

fn norm_parts(disc: &Discretization, v: &[f64]) -> NormParts {
    let rho = disc.problem.rho;
    let mut p = NormParts::default();
    for elem in &disc.geometry.elements {
        for s in Side::BOTH {
            let a = elem.area[s.index()];
            if a > 0.0 {
                p.gradient += rho.of(s) * a * disc.gradient(v, elem.cell, s).norm_squared();
            }
        }
    }
    for &e in &disc.geometry.interface_edges {
        let Some(t) = edge_traces(
            &disc.mesh,
            &disc.geometry,
            &disc.bases,
            &disc.dofs.cell_dofs,
            e,
        ) else {
            continue;
        };
        let local = |c: &[f64; EDGE_DOFS]| (0..t.n_dofs).map(|k| c[k] * v[t.dofs[k]]).sum::<f64>();
        for se in &t.sub_edges {
            let r = rho.of(se.side);
            let jump_sq: f64 = se
                .points
                .iter()
                .map(|q| q.weight * local(&q.jump).powi(2))
                .sum();
            p.value_jump += r / se.length * jump_sq;
            // gradients are constant along the sub-edge
            p.flux_jump += r * se.length * se.length * local(&se.normal_jump).powi(2);
            p.flux_mean += r * se.length * se.length * local(&se.points[0].mean_normal).powi(2);
        }
    }
    p
}

/// Energy norm: weighted gradient, value jumps and normal-derivative jumps.
pub fn v_norm(disc: &Discretization, v: &[f64]) -> f64 {
    let p = norm_parts(disc, v);
    (p.gradient + p.value_jump + p.flux_jump).sqrt()
}

/// Energy norm augmented by the mean normal derivatives on edges.
pub fn w_norm(disc: &Discretization, v: &[f64]) -> f64 {
    let p = norm_parts(disc, v);
    (p.gradient + p.value_jump + p.flux_jump + p.flux_mean).sqrt()
}

/// Estimated orders `log(e_{l+1}/e_l) / log(h_{l+1}/h_l)`; `None` where an
/// error is not positive.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| {
            (e[0] > 0.0 && e[1] > 0.0 && e.iter().all(|v| v.is_finite()))
                // adding zero turns -0 into 0
                .then(|| (e[1] / e[0]).ln() / (h[1] / h[0]).ln() + 0.0)
        })
        .collect()
}

/// Random DOF vector vanishing on the boundary.
pub fn random_interior_vector(disc: &Discretization, rng: &mut impl Rng) -> Vec<f64> {
    disc.dofs
        .boundary(&disc.mesh)
        .iter()
        .map(|&b| if b { 0.0 } else { rng.random_range(-1.0..1.0) })
        .collect()
}

/// Smallest `a(v, v) / ‖v‖_V²` over `samples` random boundary-zero vectors.
pub fn coercivity_ratio(disc: &Discretization, full: &CsrMatrix, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let v = random_interior_vector(disc, &mut rng);
            full.quadratic_form(&v) / v_norm(disc, &v).powi(2)
        })
        .fold(f64::INFINITY, f64::min)
}
