use std::sync::Arc;

use anyhow::Result;
use clap::{Args, ValueEnum};
use cmc_forge::mc_graph::{edge_fn, solve_from, EdgeFn, InitialGuess, SolveStats};
use cmc_forge::periods::contour_domain;
use cmc_forge::{ContourSpec, GraphDomain, HelicoidGraph, ManifoldParams, ScalarField, SolveOptions};
use serde::{Deserialize, Serialize};

use crate::config::usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    /// Daniel-Hauswirth helicoid graph in Nil.
    Helicoid,
    /// `u = −xy/2`, minimal in Nil.
    Saddle,
    /// Euclidean sphere of radius 2, `H = −1/2`.
    SphereCap,
    /// Euclidean plane.
    Affine,
    /// Truncated period contour in Nil, no closed form.
    Contour,
}

/// Flags shared by `solve` and `trace`.
#[derive(Args, Serialize)]
pub struct ProblemArgs {
    #[arg(long, value_enum)]
    problem: Option<Problem>,
    #[arg(long)]
    h: Option<f64>,
    /// Half side of the square domain.
    #[arg(long)]
    radius: Option<f64>,
    /// Helicoid pitch.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemConfig {
    pub problem: Problem,
    pub h: f64,
    /// Square domain; defaults depend on the problem.
    pub center: Option<[f64; 2]>,
    pub radius: Option<f64>,
    /// Replaces the square; boundary data comes from the closed form.
    pub polygon: Option<Vec<[f64; 2]>>,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub phi: f64,
    pub n: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: Option<u64>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        let solver = SolveOptions::default();
        Self {
            problem: Problem::Saddle,
            h: 0.05,
            center: None,
            radius: None,
            polygon: None,
            alpha: 1.0,
            a: 1.0,
            b: 0.3,
            phi: std::f64::consts::FRAC_PI_3,
            n: 4.0,
            tol: solver.tol,
            max_iter: solver.max_iter,
            seed: None,
        }
    }
}

type Exact = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

pub struct Built {
    pub domain: Arc<GraphDomain>,
    pub params: ManifoldParams,
    pub h_mean: f64,
    pub exact: Option<Exact>,
}

impl ProblemConfig {
    pub fn solver(&self) -> SolveOptions {
        SolveOptions {
            h: None,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }

    pub fn build(&self) -> Result<Built> {
        if !(self.h > 0.0) {
            return Err(usage(format!("h must be positive, got {}", self.h)));
        }
        let (params, h_mean, exact, center, radius): (_, _, Exact, _, _) = match self.problem {
            Problem::Contour => {
                let spec = ContourSpec::new(self.a, self.b, self.phi, self.n)?;
                return Ok(Built {
                    domain: contour_domain(&spec, self.h)?,
                    params: ManifoldParams::nil_symmetric(),
                    h_mean: 0.0,
                    exact: None,
                });
            }
            Problem::Helicoid => {
                let g = HelicoidGraph::new(self.alpha)?;
                let r = 0.4 * g.half_width();
                let f = move |x: f64, y: f64| g.height_symmetric(x, y).unwrap_or(f64::NAN);
                (ManifoldParams::nil_symmetric(), 0.0, Arc::new(f), [r, 0.0], r)
            }
            Problem::Saddle => (
                ManifoldParams::nil_symmetric(),
                0.0,
                Arc::new(|x: f64, y: f64| -0.5 * x * y),
                [0.5, 0.5],
                0.5,
            ),
            Problem::SphereCap => (
                ManifoldParams::euclidean(),
                -0.5,
                Arc::new(|x: f64, y: f64| (4.0 - x * x - y * y).sqrt()),
                [0.0, 0.0],
                0.5,
            ),
            Problem::Affine => (
                ManifoldParams::euclidean(),
                0.0,
                Arc::new(|x: f64, y: f64| 1.0 + 2.0 * x - 3.0 * y),
                [0.5, 0.5],
                0.5,
            ),
        };
        let polygon = match &self.polygon {
            Some(p) => p.clone(),
            None => {
                let c = self.center.unwrap_or(center);
                let r = self.radius.unwrap_or(radius);
                vec![
                    [c[0] - r, c[1] - r],
                    [c[0] + r, c[1] - r],
                    [c[0] + r, c[1] + r],
                    [c[0] - r, c[1] + r],
                ]
            }
        };
        let edges: Vec<EdgeFn> = (0..polygon.len())
            .map(|_| {
                let f = exact.clone();
                edge_fn(move |x, y| f(x, y))
            })
            .collect();
        let domain = Arc::new(GraphDomain::cartesian(polygon, self.h, edges)?);
        if let Some(p) = domain
            .inside_nodes()
            .iter()
            .map(|&(i, j)| domain.position(i, j))
            .find(|p| !exact(p[0], p[1]).is_finite())
        {
            return Err(usage(format!("the closed form is undefined at ({}, {})", p[0], p[1])));
        }
        Ok(Built {
            domain,
            params,
            h_mean,
            exact: Some(exact),
        })
    }

    pub fn solve(&self) -> Result<(Built, ScalarField, SolveStats)> {
        let built = self.build()?;
        let (field, stats) = solve_from(
            built.domain.clone(),
            built.params,
            built.h_mean,
            &self.solver(),
            InitialGuess::Laplace,
        )?;
        Ok((built, field, stats))
    }
}

impl Built {
    /// Largest nodal error against the closed form, if there is one.
    pub fn error(&self, field: &ScalarField) -> Result<Option<f64>> {
        let Some(f) = &self.exact else { return Ok(None) };
        let f = f.clone();
        let exact = ScalarField::from_fn(self.domain.clone(), self.params, self.h_mean, move |x, y| f(x, y));
        Ok(Some(field.max_abs_diff(&exact)?))
    }
}
