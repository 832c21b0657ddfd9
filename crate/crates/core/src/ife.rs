//! Coupled piecewise-linear basis on cut triangles.
//!
//! On a cut cell each basis function has one linear branch per side,
//! `w_i^s = sum_j a^s_ij λ_j`. The six coefficients of `w_i` are fixed by the
//! nodal conditions at the three vertices (each on its own side) and three
//! coupling conditions at the arc midpoint `x0`: equal values, equal
//! tangential derivatives and equal fluxes `ρ D_n w`. The two-point variant
//! replaces value and tangential conditions by equal values at the two
//! crossings.

use crate::error::{Error, Result};
use crate::geometry::{Barycentric, Side, Vec2};
use crate::interface::CutElement;

/// Which coupling conditions define the cut-cell space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisVariant {
    /// Value, tangential derivative and flux matched at the arc midpoint.
    #[default]
    MidpointTangent,
    /// Values matched at both crossings, flux matched at the arc midpoint.
    TwoPoint,
}

impl BasisVariant {
    pub fn name(self) -> &'static str {
        match self {
            BasisVariant::MidpointTangent => "midpoint-tangent",
            BasisVariant::TwoPoint => "two-point",
        }
    }
}

impl std::str::FromStr for BasisVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "midpoint-tangent" | "midpoint" => Ok(BasisVariant::MidpointTangent),
            "two-point" | "twopoint" => Ok(BasisVariant::TwoPoint),
            other => Err(Error::Config(format!("unknown basis variant '{other}'"))),
        }
    }
}

/// Affine function `value + gradient · (x - origin)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFunction {
    pub origin: Vec2,
    pub value: f64,
    pub gradient: Vec2,
}

impl LinearFunction {
    pub fn eval(&self, x: Vec2) -> f64 {
        self.value + self.gradient.dot(&(x - self.origin))
    }
}

/// Extension of a plus-side linear function to the minus side that keeps the
/// value and tangential slope at `x0` and scales the normal slope by `ρ+/ρ-`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpsilonMap {
    pub x0: Vec2,
    pub n0: Vec2,
    pub t0: Vec2,
    pub rho_minus: f64,
    pub rho_plus: f64,
}

impl UpsilonMap {
    pub fn new(x0: Vec2, n0: Vec2, t0: Vec2, rho_minus: f64, rho_plus: f64) -> Result<Self> {
        if !(rho_minus > 0.0) || !(rho_plus > 0.0) {
            return Err(Error::Parameter(format!(
                "diffusion coefficients must be positive, got ρ- = {rho_minus}, ρ+ = {rho_plus}"
            )));
        }
        Ok(Self {
            x0,
            n0,
            t0,
            rho_minus,
            rho_plus,
        })
    }

    pub fn apply(&self, v: &LinearFunction) -> LinearFunction {
        let dt = v.gradient.dot(&self.t0);
        let dn = v.gradient.dot(&self.n0);
        LinearFunction {
            origin: self.x0,
            value: v.eval(self.x0),
            gradient: dt * self.t0 + (self.rho_plus / self.rho_minus) * dn * self.n0,
        }
    }
}

/// Condition-number gate for the 6x6 coefficient system.
pub const MAX_CONDITION: f64 = 1e12;

/// Local basis of one cell. Uncut cells hold the standard hat functions on
/// both branches.
#[derive(Debug, Clone, PartialEq)]
pub struct IfeBasis {
    pub cell: usize,
    pub variant: BasisVariant,
    pub cut: bool,
    pub bary: Barycentric,
    /// `coef[side][i][j]`: coefficient of `λ_j` in branch `side` of `w_i`.
    pub coef: [[[f64; 3]; 3]; 2],
    /// `grads[side][i]`: constant gradient of branch `side` of `w_i`.
    pub grads: [[Vec2; 3]; 2],
    /// Condition estimate of the equilibrated coefficient system (1 if uncut).
    pub condition: f64,
}

impl IfeBasis {
    pub fn standard(cell: usize, bary: Barycentric) -> Self {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        Self {
            cell,
            variant: BasisVariant::MidpointTangent,
            cut: false,
            bary,
            coef: [id, id],
            grads: [bary.gradients, bary.gradients],
            condition: 1.0,
        }
    }

    /// Branch values at `x` without a containment check.
    pub fn values(&self, x: Vec2, side: Side) -> [f64; 3] {
        let l = self.bary.coords(x);
        let c = &self.coef[side.index()];
        [0, 1, 2].map(|i| c[i][0] * l[0] + c[i][1] * l[1] + c[i][2] * l[2])
    }

    pub fn gradients(&self, side: Side) -> [Vec2; 3] {
        self.grads[side.index()]
    }

    /// Branch of basis function `i` as an affine function.
    pub fn branch(&self, i: usize, side: Side) -> LinearFunction {
        let origin = self.bary.vertices[0];
        LinearFunction {
            origin,
            value: self.values(origin, side)[i],
            gradient: self.grads[side.index()][i],
        }
    }
}

/// Values and gradients of the three basis functions at `x` on branch `side`.
pub fn eval_basis(basis: &IfeBasis, x: Vec2, side: Side) -> Result<([f64; 3], [Vec2; 3])> {
    let l = basis.bary.coords(x);
    let tol = 1e-12 * basis.bary.diameter();
    // barycentric coordinates scale like distance / h
    let h = basis.bary.diameter();
    if l.iter().any(|&v| v * h < -tol) {
        return Err(Error::OutsideCell {
            cell: basis.cell,
            x: x.x,
            y: x.y,
        });
    }
    Ok((basis.values(x, side), basis.gradients(side)))
}

/// Build the local basis of a cell. Uncut cells get the standard hats.
pub fn build_local_basis(
    elem: &CutElement,
    rho_minus: f64,
    rho_plus: f64,
    variant: BasisVariant,
) -> Result<IfeBasis> {
    if !(rho_minus > 0.0) || !(rho_plus > 0.0) {
        return Err(Error::Parameter(format!(
            "diffusion coefficients must be positive, got ρ- = {rho_minus}, ρ+ = {rho_plus}"
        )));
    }
    let bary = Barycentric::new(elem.vertices);
    let Some(cut) = &elem.cut else {
        return Ok(IfeBasis::standard(elem.cell, bary));
    };

    let g = bary.gradients;
    let mut m = [[0.0f64; 6]; 6];
    for j in 0..3 {
        let col = match elem.vertex_sides[j] {
            Side::Plus => j,
            Side::Minus => 3 + j,
        };
        m[j][col] = 1.0;
    }
    let coupling_rows: [[f64; 3]; 2] = match variant {
        BasisVariant::MidpointTangent => [bary.coords(cut.x0), g.map(|gj| gj.dot(&cut.t0))],
        BasisVariant::TwoPoint => [
            bary.coords(cut.crossings[0].point),
            bary.coords(cut.crossings[1].point),
        ],
    };
    for (r, row) in coupling_rows.iter().enumerate() {
        for j in 0..3 {
            m[3 + r][j] = row[j];
            m[3 + r][3 + j] = -row[j];
        }
    }
    for j in 0..3 {
        let dn = g[j].dot(&cut.n0);
        m[5][j] = rho_plus * dn;
        m[5][3 + j] = -rho_minus * dn;
    }

    // row equilibration keeps the flux row comparable to the others
    for row in m.iter_mut() {
        let s = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    let crossings = cut.crossings.map(|c| [c.point.x, c.point.y]);
    let fail = |condition: f64| Error::BasisConstruction {
        cell: elem.cell,
        condition,
        crossings,
    };
    let lu = Lu6::factor(m).ok_or_else(|| fail(f64::INFINITY))?;
    let inv_norm = (0..6)
        .map(|k| {
            let mut e = [0.0; 6];
            e[k] = 1.0;
            lu.solve(e)
        })
        .fold([0.0f64; 6], |mut acc, col| {
            for (a, c) in acc.iter_mut().zip(col) {
                *a += c.abs();
            }
            acc
        })
        .into_iter()
        .fold(0.0, f64::max);
    let a_norm = m
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let condition = a_norm * inv_norm;
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(fail(condition));
    }

    let mut coef = [[[0.0; 3]; 3]; 2];
    for i in 0..3 {
        let mut rhs = [0.0; 6];
        // right-hand sides of the nodal rows were scaled by 1
        rhs[i] = 1.0;
        let mut x = lu.solve(rhs);
        // one refinement step; minus coefficients grow like ρ+/ρ-
        let mut r = rhs;
        for (rk, row) in r.iter_mut().zip(&m) {
            *rk -= row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        }
        for (xk, dk) in x.iter_mut().zip(lu.solve(r)) {
            *xk += dk;
        }
        coef[Side::Plus.index()][i].copy_from_slice(&x[..3]);
        coef[Side::Minus.index()][i].copy_from_slice(&x[3..6]);
    }
    let grads =
        [0, 1].map(|s| [0, 1, 2].map(|i| (0..3).map(|j| coef[s][i][j] * g[j]).sum::<Vec2>()));
    Ok(IfeBasis {
        cell: elem.cell,
        variant,
        cut: true,
        bary,
        coef,
        grads,
        condition,
    })
}

/// LU factorization of a 6x6 matrix with partial pivoting.
struct Lu6 {
    lu: [[f64; 6]; 6],
    perm: [usize; 6],
}

impl Lu6 {
    fn factor(mut a: [[f64; 6]; 6]) -> Option<Self> {
        let mut perm = [0, 1, 2, 3, 4, 5];
        for k in 0..6 {
            let p = (k..6).max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs()))?;
            if a[p][k] == 0.0 {
                return None;
            }
            a.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..6 {
                let f = a[i][k] / a[k][k];
                a[i][k] = f;
                for j in k + 1..6 {
                    a[i][j] -= f * a[k][j];
                }
            }
        }
        Some(Self { lu: a, perm })
    }

    fn solve(&self, b: [f64; 6]) -> [f64; 6] {
        let mut x = self.perm.map(|p| b[p]);
        for i in 0..6 {
            for j in 0..i {
                x[i] -= self.lu[i][j] * x[j];
            }
        }
        for i in (0..6).rev() {
            for j in i + 1..6 {
                x[i] -= self.lu[i][j] * x[j];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }
}

/// Residuals of the defining conditions of a cut-cell basis. Derivative
/// residuals are relative to the gradient scale of the basis function.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BasisResiduals {
    pub nodal: f64,
    pub value_jump: f64,
    pub tangent_jump: f64,
    pub flux_jump: f64,
    pub partition: f64,
    /// Two-point variant only: value mismatch at the crossings.
    pub crossing_jump: f64,
}

impl BasisResiduals {
    pub fn max(&self) -> f64 {
        [
            self.nodal,
            self.value_jump,
            self.tangent_jump,
            self.flux_jump,
            self.partition,
            self.crossing_jump,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn basis_residuals(
    basis: &IfeBasis,
    elem: &CutElement,
    rho_minus: f64,
    rho_plus: f64,
) -> BasisResiduals {
    let mut r = BasisResiduals::default();
    for j in 0..3 {
        let vals = basis.values(elem.vertices[j], elem.vertex_sides[j]);
        for (i, v) in vals.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            r.nodal = r.nodal.max((v - target).abs());
        }
    }
    for s in Side::BOTH {
        for j in 0..3 {
            let sum: f64 = (0..3).map(|i| basis.coef[s.index()][i][j]).sum();
            r.partition = r.partition.max((sum - 1.0).abs());
        }
    }
    let Some(cut) = &elem.cut else { return r };
    let vm = basis.values(cut.x0, Side::Minus);
    let vp = basis.values(cut.x0, Side::Plus);
    for i in 0..3 {
        let gm = basis.grads[0][i];
        let gp = basis.grads[1][i];
        let scale = gm.norm().max(gp.norm()).max(1.0);
        let flux_scale = (rho_minus * gm.norm()).max(rho_plus * gp.norm()).max(1.0);
        r.value_jump = r.value_jump.max((vp[i] - vm[i]).abs());
        if basis.variant == BasisVariant::MidpointTangent {
            r.tangent_jump = r.tangent_jump.max((gp - gm).dot(&cut.t0).abs() / scale);
        }
        r.flux_jump = r
            .flux_jump
            .max((rho_plus * gp.dot(&cut.n0) - rho_minus * gm.dot(&cut.n0)).abs() / flux_scale);
    }
    if basis.variant == BasisVariant::TwoPoint {
        // only the crossings are matched; x0 agreement is not a condition
        r.value_jump = 0.0;
        for c in &cut.crossings {
            let a = basis.values(c.point, Side::Minus);
            let b = basis.values(c.point, Side::Plus);
            for i in 0..3 {
                r.crossing_jump = r.crossing_jump.max((a[i] - b[i]).abs());
            }
        }
    }
    r
}
