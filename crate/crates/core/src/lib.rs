//! Immersed piecewise-linear finite elements for elliptic interface problems
//! with high-contrast piecewise-constant diffusion.
//!
//! The mesh is a structured triangulation of `(-1, 1)^2` that does not follow
//! the interface. Triangles cut by the interface carry a coupled local space
//! whose two linear branches match value, tangential derivative and flux at
//! the arc midpoint of the cut. Functions are coupled across the edges of cut
//! triangles by an interior-penalty form with value-jump penalties and
//! normal-flux-jump stabilization.
//!
//! Module map:
//!
//! * [`mesh`]: structured triangulation and topology.
//! * [`interface`]: interface curve, cell classification, cut geometry and
//!   integration over curved sub-regions.
//! * [`ife`]: the coupled local basis on cut triangles.
//! * [`forms`]: bilinear-form variants, load functional, model problems.
//! * [`dofs`]: vertex-shared or band-broken degree-of-freedom layouts.
//! * [`assembly`]: global sparse system, Dirichlet lifting, PCG solver.
//! * [`norms`]: error measures, energy norms, convergence orders.
//! * [`study`]: convergence studies, contrast sweeps and file output.

pub mod assembly;
pub mod dofs;
pub mod error;
pub mod forms;
pub mod geometry;
pub mod ife;
pub mod interface;
pub mod mesh;
pub mod norms;
pub mod quadrature;
pub mod study;

pub use error::{Error, Result};
pub use geometry::{Side, Vec2};
