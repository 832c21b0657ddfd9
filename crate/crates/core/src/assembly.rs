//! Global sparse system, Dirichlet lifting and its iterative solution.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::dofs::{DofLayout, DofMap};
use crate::error::{Error, Result};
use crate::forms::{edge_terms, edge_traces, load_vector, volume_term, MethodVariant, ProblemSpec};
use crate::geometry::Side;
use crate::ife::{build_local_basis, BasisVariant, IfeBasis};
use crate::interface::{CutGeometry, RegionRule};
use crate::mesh::TriMesh;

/// Square matrix in compressed sparse row layout, columns sorted per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries in the order given, so equal input gives
    /// bit-identical output.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "entry ({i}, {j}) outside {n}x{n}");
            if last == Some((i, j)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        });
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        dot(x, &y)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[i][j] = v;
            }
        }
        d
    }

    /// `max |A - A^T| / max |A|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            self.row(i).all(|(j, _)| {
                let r = self.row_ptr[j]..self.row_ptr[j + 1];
                self.col_idx[r].binary_search(&i).is_ok()
            })
        })
    }

    /// Lower triangle in MatrixMarket symmetric coordinate format.
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let lower: usize = (0..self.n)
            .map(|i| self.row(i).filter(|&(j, _)| j <= i).count())
            .sum();
        let mut body = || -> std::io::Result<()> {
            writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
            writeln!(w, "{} {} {}", self.n, self.n, lower)?;
            for i in 0..self.n {
                for (j, v) in self.row(i).filter(|&(j, _)| j <= i) {
                    writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
                }
            }
            w.flush()
        };
        body().map_err(|e| Error::io(path, e))
    }
}

const DOT_BLOCK: usize = 4096;

/// Dot product with a fixed summation order independent of the thread count.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(DOT_BLOCK)
        .zip(b.par_chunks(DOT_BLOCK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// Choices that fix the discrete space and the cut-cell integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DiscretizationOptions {
    pub basis: BasisVariant,
    pub layout: DofLayout,
    /// Sub-regions used by the volume and load integrals.
    pub regions: RegionRule,
}

/// Mesh, cut geometry, local bases and DOF map of one problem.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: TriMesh,
    pub problem: ProblemSpec,
    pub geometry: CutGeometry,
    pub bases: Vec<IfeBasis>,
    pub dofs: DofMap,
    pub options: DiscretizationOptions,
}

impl Discretization {
    /// Discretization with the given local basis and default options
    /// otherwise.
    pub fn new(mesh: TriMesh, problem: ProblemSpec, basis: BasisVariant) -> Result<Self> {
        Self::with_options(
            mesh,
            problem,
            DiscretizationOptions {
                basis,
                ..Default::default()
            },
        )
    }

    pub fn with_options(
        mesh: TriMesh,
        problem: ProblemSpec,
        options: DiscretizationOptions,
    ) -> Result<Self> {
        let geometry = CutGeometry::build(&mesh, &problem.interface)?;
        let rho = problem.rho;
        let bases = geometry
            .elements
            .par_iter()
            .map(|e| build_local_basis(e, rho.minus, rho.plus, options.basis))
            .collect::<Result<Vec<_>>>()?;
        let dofs = DofMap::build(&mesh, &geometry, options.layout);
        Ok(Self {
            mesh,
            problem,
            geometry,
            bases,
            dofs,
            options,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    /// Reference solution at a vertex, on the vertex's own side.
    pub fn nodal_value(&self, v: usize) -> f64 {
        self.problem
            .solution
            .value(self.mesh.vertices[v], self.geometry.vertex_sides[v])
    }

    /// Nodal interpolant of the reference solution.
    pub fn interpolant(&self) -> Vec<f64> {
        self.dofs
            .vertex
            .iter()
            .map(|&v| self.nodal_value(v))
            .collect()
    }

    /// Side-resolved value of a discrete function on `cell` at `x`.
    pub fn eval(&self, coeffs: &[f64], cell: usize, x: crate::Vec2, side: Side) -> f64 {
        let w = self.bases[cell].values(x, side);
        let dofs = self.dofs.cell_dofs[cell];
        (0..3).map(|i| coeffs[dofs[i]] * w[i]).sum()
    }

    pub fn gradient(&self, coeffs: &[f64], cell: usize, side: Side) -> crate::Vec2 {
        let g = self.bases[cell].gradients(side);
        let dofs = self.dofs.cell_dofs[cell];
        (0..3).map(|i| coeffs[dofs[i]] * g[i]).sum()
    }
}

/// Assembled system before and after elimination of boundary DOFs.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    /// Matrix over all DOFs.
    pub full: CsrMatrix,
    /// Load over all DOFs.
    pub full_rhs: Vec<f64>,
    /// Matrix over the free DOFs.
    pub matrix: CsrMatrix,
    /// Lifted right-hand side over the free DOFs.
    pub rhs: Vec<f64>,
    /// Full index of each free DOF.
    pub free: Vec<usize>,
    /// Free index of each full DOF.
    pub dof_of_vertex: Vec<Option<usize>>,
    pub boundary: Vec<bool>,
    /// Prescribed values on boundary DOFs, zero elsewhere.
    pub boundary_values: Vec<f64>,
}

impl SparseSystem {
    /// Full DOF vector from a free-DOF solution.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        self.dof_of_vertex
            .iter()
            .zip(&self.boundary_values)
            .map(|(d, &g)| d.map_or(g, |k| reduced[k]))
            .collect()
    }
}

/// Matrix and load over all DOFs, without boundary conditions.
pub fn assemble_full(
    disc: &Discretization,
    variant: &MethodVariant,
) -> Result<(CsrMatrix, Vec<f64>)> {
    let mesh = &disc.mesh;
    let geo = &disc.geometry;
    let rho = disc.problem.rho;
    let iface = &disc.problem.interface;
    let solution = disc.problem.solution.as_ref();

    let cell_parts: Vec<([[f64; 3]; 3], [f64; 3])> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let elem = &geo.elements[c];
            let basis = &disc.bases[c];
            let regions = disc.options.regions;
            Ok((
                volume_term(elem, basis, rho, regions),
                load_vector(iface, elem, basis, solution, regions)?,
            ))
        })
        .collect::<Result<_>>()?;
    let edge_parts: Vec<_> = geo
        .interface_edges
        .par_iter()
        .filter_map(|&e| edge_traces(mesh, geo, &disc.bases, &disc.dofs.cell_dofs, e))
        .map(|t| {
            let m = edge_terms(&t, rho, variant);
            (t.dofs, t.n_dofs, m)
        })
        .collect();

    let mut triplets = Vec::with_capacity(9 * mesh.n_cells() + 16 * edge_parts.len());
    let mut rhs = vec![0.0; disc.n_dofs()];
    for (c, (k, f)) in cell_parts.iter().enumerate() {
        let dofs = disc.dofs.cell_dofs[c];
        for i in 0..3 {
            rhs[dofs[i]] += f[i];
            for j in 0..3 {
                triplets.push((dofs[i], dofs[j], k[i][j]));
            }
        }
    }
    for (dofs, n, m) in &edge_parts {
        for i in 0..*n {
            for j in 0..*n {
                triplets.push((dofs[i], dofs[j], m[i][j]));
            }
        }
    }
    Ok((CsrMatrix::from_triplets(disc.n_dofs(), triplets), rhs))
}

/// Eliminates boundary DOFs, moving their known values to the right-hand
/// side.
pub fn apply_dirichlet(
    full: CsrMatrix,
    full_rhs: Vec<f64>,
    boundary: &[bool],
    values: &[f64],
) -> SparseSystem {
    let mut dof_of_vertex = vec![None; full.n];
    let mut free = Vec::new();
    for v in 0..full.n {
        if !boundary[v] {
            dof_of_vertex[v] = Some(free.len());
            free.push(v);
        }
    }
    let boundary_values: Vec<f64> = (0..full.n)
        .map(|v| if boundary[v] { values[v] } else { 0.0 })
        .collect();
    let mut triplets = Vec::with_capacity(full.nnz());
    let mut rhs = Vec::with_capacity(free.len());
    for (k, &v) in free.iter().enumerate() {
        let mut b = full_rhs[v];
        for (j, a) in full.row(v) {
            match dof_of_vertex[j] {
                Some(l) => triplets.push((k, l, a)),
                None => b -= a * boundary_values[j],
            }
        }
        rhs.push(b);
    }
    let matrix = CsrMatrix::from_triplets(free.len(), triplets);
    SparseSystem {
        full,
        full_rhs,
        matrix,
        rhs,
        free,
        dof_of_vertex,
        boundary: boundary.to_vec(),
        boundary_values,
    }
}

/// Full assembly with Dirichlet data from the nodal interpolant of the
/// reference solution.
pub fn assemble(disc: &Discretization, variant: &MethodVariant) -> Result<SparseSystem> {
    let (full, rhs) = assemble_full(disc, variant)?;
    let values = disc.interpolant();
    Ok(apply_dirichlet(
        full,
        rhs,
        &disc.dofs.boundary(&disc.mesh),
        &values,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    #[default]
    Jacobi,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative preconditioned residual target.
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final `sqrt(r·M⁻¹r) / sqrt(b·M⁻¹b)`.
    pub residual: f64,
    /// Seconds.
    pub wall_time: f64,
}

const HISTORY_TAIL: usize = 10;

/// Preconditioned conjugate gradients.
pub fn solve(
    matrix: &CsrMatrix,
    rhs: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::Parameter(format!(
            "solver tolerance must lie in (0, 1), got {}",
            opts.tol
        )));
    }
    let n = matrix.n;
    let inv_diag: Vec<f64> = match opts.preconditioner {
        Preconditioner::Jacobi => matrix
            .diagonal()
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::Parameter(format!(
                        "non-positive diagonal entry {d} in row {i}"
                    )))
                }
            })
            .collect::<Result<_>>()?,
        Preconditioner::None => vec![1.0; n],
    };
    let precondition = |r: &[f64], z: &mut [f64]| {
        z.par_iter_mut()
            .zip(r)
            .zip(&inv_diag)
            .for_each(|((z, r), d)| *z = r * d);
    };

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut rz = dot(&r, &z);
    let norm_b = rz.sqrt();
    let report = |iterations, residual| SolveReport {
        iterations,
        residual,
        wall_time: start.elapsed().as_secs_f64(),
    };
    if norm_b == 0.0 {
        return Ok((x, report(0, 0.0)));
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut history = Vec::with_capacity(HISTORY_TAIL + 1);
    for it in 1..=opts.max_iter {
        matrix.matvec(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(Error::Indefinite {
                iteration: it,
                curvature,
            });
        }
        let alpha = rz / curvature;
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let residual = rz_new.max(0.0).sqrt() / norm_b;
        if history.len() == HISTORY_TAIL {
            history.remove(0);
        }
        history.push(residual);
        if residual <= opts.tol {
            return Ok((x, report(it, residual)));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut()
            .zip(&z)
            .for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
        tail: history,
    })
}

/// Assembles and solves; returns the full vertex vector.
pub fn solve_problem(
    disc: &Discretization,
    variant: &MethodVariant,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SparseSystem, SolveReport)> {
    let system = assemble(disc, variant)?;
    let (x, report) = solve(&system.matrix, &system.rhs, opts)?;
    let u = system.expand(&x);
    Ok((u, system, report))
}
