//! Numerical laboratory for Patterson, Bowen-Margulis and skinning measures
//! of discrete isometry groups of the hyperbolic plane.
//!
//! The crate is layered bottom-up:
//!
//! * [`hyperbolic`]: exact geometry of the upper half-plane (isometries,
//!   Busemann cocycle, unit tangents, convex bodies).
//! * [`group`]: group specifications, orbit enumeration and growth rates.
//! * [`measure`]: atomic approximations of Patterson densities and the
//!   measures built from them.
//! * [`flow`]: Dirichlet domains, folding, measure transport and test
//!   functions for the geodesic flow.
//! * [`experiment`]: orchestrated experiments and their reports.
//! * [`io`]: run configurations and CSV/JSON interchange.

pub mod error;
pub mod experiment;
pub mod flow;
pub mod group;
pub mod hyperbolic;
pub mod io;
pub mod measure;
pub mod stats;

pub use error::{Error, Result};
