//! Degree-of-freedom layouts.
//!
//! Every DOF is a nodal value attached to one mesh vertex. With
//! [`DofLayout::Vertex`] each vertex carries exactly one DOF shared by all
//! cells around it. With [`DofLayout::Broken`] cells are glued only across
//! edges outside the interface band (edges not belonging to a cut cell), so a
//! cut cell owns its three nodal values and a vertex may carry several DOFs.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::interface::CutGeometry;
use crate::mesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DofLayout {
    /// One DOF per vertex.
    Vertex,
    /// Continuity only across edges outside the interface band.
    #[default]
    Broken,
}

impl DofLayout {
    pub fn name(self) -> &'static str {
        match self {
            DofLayout::Vertex => "vertex",
            DofLayout::Broken => "broken",
        }
    }
}

impl fmt::Display for DofLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DofLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vertex" => Ok(DofLayout::Vertex),
            "broken" => Ok(DofLayout::Broken),
            other => Err(Error::Parameter(format!("unknown dof layout `{other}`"))),
        }
    }
}

/// Cell-to-DOF map.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub layout: DofLayout,
    /// Global DOF of each local vertex of each cell.
    pub cell_dofs: Vec<[usize; 3]>,
    /// Mesh vertex of each DOF.
    pub vertex: Vec<usize>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl DofMap {
    pub fn build(mesh: &TriMesh, geo: &CutGeometry, layout: DofLayout) -> Self {
        if layout == DofLayout::Vertex {
            return Self {
                layout,
                cell_dofs: mesh.cells.clone(),
                vertex: (0..mesh.n_vertices()).collect(),
            };
        }
        // union-find over (cell, local vertex) slots
        let slot = |c: usize, v: usize| {
            3 * c
                + mesh.cells[c]
                    .iter()
                    .position(|&w| w == v)
                    .expect("vertex of cell")
        };
        let mut parent: Vec<usize> = (0..3 * mesh.n_cells()).collect();
        let mut in_band = vec![false; mesh.edges.len()];
        for &e in &geo.interface_edges {
            in_band[e] = true;
        }
        for (e, edge) in mesh.edges.iter().enumerate() {
            if in_band[e] || edge.is_boundary() {
                continue;
            }
            let [t1, t2] = edge.cells;
            for v in edge.vertices {
                let a = find(&mut parent, slot(t1, v));
                let b = find(&mut parent, slot(t2, v));
                parent[a.max(b)] = a.min(b);
            }
        }
        // vertex-major numbering, cells ascending around each vertex
        let mut around: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
        for (c, tri) in mesh.cells.iter().enumerate() {
            for &v in tri {
                around[v].push(c);
            }
        }
        let mut dof_of_root = vec![usize::MAX; parent.len()];
        let mut vertex = Vec::new();
        let mut cell_dofs = vec![[usize::MAX; 3]; mesh.n_cells()];
        for (v, cells) in around.iter().enumerate() {
            for &c in cells {
                let s = slot(c, v);
                let r = find(&mut parent, s);
                if dof_of_root[r] == usize::MAX {
                    dof_of_root[r] = vertex.len();
                    vertex.push(v);
                }
                cell_dofs[c][s % 3] = dof_of_root[r];
            }
        }
        Self {
            layout,
            cell_dofs,
            vertex,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.vertex.len()
    }

    /// DOFs sitting on boundary vertices.
    pub fn boundary(&self, mesh: &TriMesh) -> Vec<bool> {
        self.vertex
            .iter()
            .map(|&v| mesh.boundary_vertex[v])
            .collect()
    }
}
