//! Point cloud to triangle mesh: B-spline surface fitting with data-support
//! trimming, and alpha shapes as a baseline.

mod alpha;
mod bspline;
mod delaunay;
mod fit;
mod mesh;
mod tessellate;

pub use alpha::{alpha_complex, alpha_shape_mesh, AlphaComplex};
pub use bspline::{
    basis_derivatives, basis_values, clamped_uniform_knots, find_span, greville, BsplineSurface,
    SurfaceDerivatives, SurfaceDump, TrimMask,
};
pub use delaunay::Delaunay3;
pub use fit::{fit_bspline_surface, BsplineFit, BsplineFitConfig};
pub use mesh::TriangleMesh;
pub use tessellate::{samples_for_spacing, tessellate};
