//! Structured uniform triangulation of the square `(-1, 1)^2`.
//!
//! Level `l` uses `N = 2^(l+3)` squares per side. Every square is split along
//! its bottom-left to top-right diagonal, so the largest cell diameter is
//! `2^-(l + 3/2)`. Vertices and cells are numbered row-major.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Barycentric, Vec2};

/// Memory budget used to reject levels that cannot be built on a desk machine.
pub const DEFAULT_MEMORY_BUDGET: u64 = 8 << 30;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints with `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent cells, lower index first.
    pub cells: [usize; 2],
    pub n_cells: usize,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.n_cells == 1
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub level: u32,
    /// Squares per side.
    pub n: usize,
    pub h: f64,
    pub vertices: Vec<Vec2>,
    /// Counterclockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// `cell_edges[c][k]` joins local vertices `k` and `(k + 1) % 3`.
    pub cell_edges: Vec<[usize; 3]>,
    pub boundary_vertex: Vec<bool>,
}

/// Rough byte count of a full solve at `level`: mesh, cut data, sparse matrix
/// and solver vectors.
pub fn estimated_bytes(level: u32) -> u64 {
    let n = 1u64 << (level + 3).min(40);
    let verts = (n + 1) * (n + 1);
    let cells = 2 * n * n;
    let edges = verts + cells;
    // ~16 B per vertex coordinate, ~40 B per cell, ~48 B per edge, ~7 nonzeros
    // per row at 16 B and ~10 solver vectors.
    verts * 16 + cells * 40 + edges * 48 + verts * 7 * 16 + verts * 10 * 8
}

impl TriMesh {
    pub fn uniform(level: u32) -> Result<Self> {
        Self::uniform_with_budget(level, DEFAULT_MEMORY_BUDGET)
    }

    pub fn uniform_with_budget(level: u32, budget: u64) -> Result<Self> {
        if level < 1 {
            return Err(Error::Parameter(format!(
                "mesh level must be >= 1, got {level}"
            )));
        }
        let bytes = estimated_bytes(level);
        if level > 24 || bytes > budget {
            return Err(Error::Resource {
                level,
                bytes,
                budget,
            });
        }
        let n = 1usize << (level + 3);
        let step = 2.0 / n as f64;
        let row = n + 1;
        let mut vertices = Vec::with_capacity(row * row);
        let mut boundary_vertex = Vec::with_capacity(row * row);
        for j in 0..=n {
            for i in 0..=n {
                vertices.push(Vec2::new(-1.0 + i as f64 * step, -1.0 + j as f64 * step));
                boundary_vertex.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = j * row + i;
                let b = a + 1;
                let c = a + row + 1;
                let d = a + row;
                cells.push([a, b, c]);
                cells.push([a, c, d]);
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * n * n + 2 * n);
        let mut edges: Vec<Edge> = Vec::with_capacity(3 * n * n + 2 * n);
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, tri) in cells.iter().enumerate() {
            let mut local = [0usize; 3];
            for k in 0..3 {
                let (p, q) = (tri[k], tri[(k + 1) % 3]);
                let key = (p.min(q), p.max(q));
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        cells: [c, usize::MAX],
                        n_cells: 0,
                    });
                    edges.len() - 1
                });
                let e = &mut edges[id];
                // cells are visited in increasing order, so the first slot holds
                // the lower index
                e.cells[e.n_cells] = c;
                e.n_cells += 1;
                local[k] = id;
            }
            cell_edges.push(local);
        }

        Ok(Self {
            level,
            n,
            h: std::f64::consts::SQRT_2 * step,
            vertices,
            cells,
            edges,
            cell_edges,
            boundary_vertex,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_points(&self, cell: usize) -> [Vec2; 3] {
        let [a, b, c] = self.cells[cell];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn barycentric(&self, cell: usize) -> Barycentric {
        Barycentric::new(self.cell_points(cell))
    }

    /// Cells adjacent to an edge: the lower index first, then the neighbour
    /// across the edge if there is one.
    pub fn edge_patch(&self, edge: usize) -> (usize, Option<usize>) {
        let e = &self.edges[edge];
        (e.cells[0], (e.n_cells == 2).then_some(e.cells[1]))
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.edges[edge].is_boundary()
    }

    /// Local vertex index (0..3) of a global vertex in a cell.
    pub fn local_index(&self, cell: usize, vertex: usize) -> Option<usize> {
        self.cells[cell].iter().position(|&v| v == vertex)
    }

    /// Outward unit normal of `cell` on one of its edges.
    pub fn outward_normal(&self, cell: usize, edge: usize) -> Vec2 {
        let [p, q] = self.edges[edge].vertices;
        let tri = self.cells[cell];
        let opposite = tri
            .iter()
            .copied()
            .find(|&v| v != p && v != q)
            .expect("edge of cell");
        let (a, b, c) = (self.vertices[p], self.vertices[q], self.vertices[opposite]);
        let t = (b - a).normalize();
        let mut n = Vec2::new(t.y, -t.x);
        if n.dot(&(c - a)) > 0.0 {
            n = -n;
        }
        n
    }

    /// Plain-text dump: `v x y` per vertex, `c i j k` per cell.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            for v in &self.vertices {
                writeln!(w, "v {} {}", v.x, v.y)?;
            }
            for c in &self.cells {
                writeln!(w, "c {} {} {}", c[0], c[1], c[2])?;
            }
            w.flush()
        };
        emit().map_err(|e| Error::io(path, e))
    }
}
