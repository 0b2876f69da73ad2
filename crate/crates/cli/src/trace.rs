use std::io::Write;

use anyhow::Result;
use clap::Args;
use cmc_forge::mc_graph::edge_trace;
use cmc_forge::periods::C1_EDGE;
use cmc_forge::sister::{curve_k_t, first_period_identity_check};
use cmc_forge::CurveKind;
use serde::{Deserialize, Serialize};

use crate::output::OutDir;
use crate::problem::{Problem, ProblemArgs, ProblemConfig};

#[derive(Args, Serialize)]
pub struct TraceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    problem: ProblemArgs,
    /// Polygon edge to trace; defaults to `c₁` for contours and 0 otherwise.
    #[arg(long)]
    edge: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceConfig {
    #[serde(flatten)]
    pub problem: ProblemConfig,
    pub edge: Option<usize>,
}

#[derive(Serialize)]
struct Summary {
    edge: usize,
    length: f64,
    /// `∫⟨η, ξ⟩` along the edge.
    period: f64,
    /// The same period from the sister-side integrand.
    period_sister: f64,
    frame_defect: f64,
    kind: Option<String>,
}

/// Conormal trace along one edge, its curvature and torsion, and the
/// sister-side form of the period.
pub fn run(cfg: &TraceConfig, out: &mut OutDir) -> Result<()> {
    let edge = cfg.edge.unwrap_or(if cfg.problem.problem == Problem::Contour {
        C1_EDGE
    } else {
        0
    });
    let (_, field, _) = cfg.problem.solve()?;
    let trace = edge_trace(&field, edge)?;
    out.write("trace.csv", |w| {
        writeln!(w, "s,x,y,eta1,eta2,eta3,eta_vertical")?;
        for i in 0..trace.s.len() {
            let (p, e) = (trace.points[i], trace.eta[i]);
            writeln!(
                w,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                trace.s[i], p[0], p[1], e[0], e[1], e[2], trace.eta_vertical[i]
            )?;
        }
        Ok(())
    })?;
    let data = curve_k_t(&field, edge)?;
    let kind = data.kind();
    out.write("sister.csv", |w| {
        Ok(data.write_csv(w, kind.unwrap_or(CurveKind::Horizontal))?)
    })?;
    let (period, period_sister) = first_period_identity_check(&field, edge)?;
    let summary = Summary {
        edge,
        length: trace.length(),
        period,
        period_sister,
        frame_defect: data.frame_defect(),
        kind: kind.map(|k| k.to_string()),
    };
    out.write_json("trace.json", &summary)?;
    println!("edge {edge}: period {period:.8} (sister form {period_sister:.8})");
    Ok(())
}
