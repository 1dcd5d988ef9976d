//! Exact-formula geometry of the upper half-plane model of H².
//!
//! Boundary points are stored as angles on the unit circle (after the Cayley
//! transform `z ↦ (z − i)/(z + i)`), so the point at infinity needs no special
//! casing. Unit tangent vectors are stored as frames in PSL(2, R): the frame
//! `g` represents the vector `g·(i, ↑)`, which makes the geodesic flow and the
//! group action plain matrix products.

mod convex;
mod isometry;
mod metric;
mod point;
mod quadrature;
mod tangent;

pub use convex::ConvexBody;
pub use isometry::{Action, Classification, Isometry};
pub use metric::{busemann, dist, visual_dist};
pub use point::{BoundaryPoint, Point, BOUNDARY_EQ_TOL};
pub use quadrature::{gauss_hermite, T1_QUADRATURE_NODES};
pub use tangent::{hamenstadt_dist, in_thickening, t1_dist, HopfCoords, UnitTangent, LEAF_TOL};
