//! Fixtures shared by the `kernels` benches.

use std::sync::Arc;

use cmc_forge::mc_graph::{edge_fn, EdgeFn};
use cmc_forge::GraphDomain;

/// Unit square with Dirichlet data `f` on every edge.
pub fn unit_square(h: f64, f: fn(f64, f64) -> f64) -> Arc<GraphDomain> {
    let poly = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let edges: Vec<EdgeFn> = (0..4).map(|_| edge_fn(f)).collect();
    Arc::new(GraphDomain::cartesian(poly, h, edges).expect("square is a valid domain"))
}

pub fn saddle(x: f64, y: f64) -> f64 {
    -0.5 * x * y
}

/// Graph data that is neither linear nor a Nil solution.
pub fn bump(x: f64, y: f64) -> f64 {
    0.3 * (3.0 * x).sin() * (2.0 * y).cos() + x * y
}
