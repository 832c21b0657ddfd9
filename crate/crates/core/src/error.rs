use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Geometric assumption violations detected while classifying a cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeometryViolation {
    /// The interface crosses a single edge more than once.
    EdgeCrossedTwice { local_edge: usize },
    /// The interface lies strictly inside the cell without touching its boundary.
    InterfaceEnclosed,
    /// The crossing pattern does not consist of two points on two distinct edges.
    CrossingCount { count: usize },
}

impl std::fmt::Display for GeometryViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeometryViolation::EdgeCrossedTwice { local_edge } => {
                write!(f, "interface crosses local edge {local_edge} twice")
            }
            GeometryViolation::InterfaceEnclosed => write!(f, "interface enclosed by the cell"),
            GeometryViolation::CrossingCount { count } => {
                write!(f, "expected 2 crossings on distinct edges, found {count}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh level {level} needs about {bytes} bytes, above the budget of {budget} bytes")]
    Resource { level: u32, bytes: u64, budget: u64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("geometry assumption violated in cell {cell}: {violation}")]
    Geometry {
        cell: usize,
        violation: GeometryViolation,
    },

    #[error("degenerate arc: endpoints coincide at ({x}, {y})")]
    DegenerateArc { x: f64, y: f64 },

    #[error("basis construction failed in cell {cell}: condition estimate {condition:.3e} (crossings {crossings:?})")]
    BasisConstruction {
        cell: usize,
        condition: f64,
        crossings: [[f64; 2]; 2],
    },

    #[error("adaptive arc quadrature did not converge after {levels} subdivision levels")]
    Quadrature { levels: usize },

    #[error("point ({x}, {y}) lies outside cell {cell}")]
    OutsideCell { cell: usize, x: f64, y: f64 },

    #[error("solver did not converge in {iterations} iterations (residual {residual:.3e}, tail {tail:?})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        tail: Vec<f64>,
    },

    #[error("matrix is not positive definite: curvature {curvature:.3e} at iteration {iteration}")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("level {level}, stage {stage}: {source}")]
    Stage {
        level: u32,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_stage(self, level: u32, stage: &'static str) -> Self {
        Error::Stage {
            level,
            stage,
            source: Box::new(self),
        }
    }
}
