//! Numerical construction of genus-one constant mean curvature 1/2 k-noids in
//! `H² × ℝ` through their minimal sister graphs in `Nil₃`.
//!
//! The crate is organised bottom-up:
//!
//! * [`etau`]: metrics, frames, horizontal lifts and holonomy in `E(κ, τ)`.
//! * [`helicoid`]: the horizontal helicoid family in `Nil₃`.
//! * [`mc_graph`]: the mean curvature graph equation on polygonal domains.
//! * [`sister`]: normal curvature/torsion bookkeeping for sister surfaces.
//! * [`hyperbolic`]: upper half-plane geometry and mirror curve reconstruction.
//! * [`periods`]: the contour, the two period problems and the final report.

// `!(x > 0.0)` rejects NaN along with the non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod etau;
pub mod helicoid;
pub mod hyperbolic;
pub mod mc_graph;
pub mod numerics;
pub mod periods;
pub mod sister;

pub use error::{Error, Result};
pub use etau::{BaseLoop, Chart, FiberedPoint, ManifoldParams};
pub use helicoid::{HelicoidGraph, HelicoidModel};
pub use hyperbolic::{HCurve, TwistProfile};
pub use mc_graph::{EdgeTrace, GraphDomain, ScalarField, SolveOptions};
pub use periods::{ContourSpec, PeriodOptions, PeriodReport};
pub use sister::{CurveFrameData, CurveKind};
