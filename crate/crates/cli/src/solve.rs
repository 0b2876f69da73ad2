use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::output::OutDir;
use crate::problem::{ProblemArgs, ProblemConfig};

#[derive(Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    problem: ProblemArgs,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    #[serde(flatten)]
    pub problem: ProblemConfig,
}

#[derive(Serialize)]
struct Summary {
    nodes: usize,
    iterations: usize,
    residual: f64,
    max_error: Option<f64>,
}

/// Solves the graph equation and writes the field as OBJ and CSV.
pub fn run(cfg: &SolveConfig, out: &mut OutDir) -> Result<()> {
    let (built, field, stats) = cfg.problem.solve()?;
    out.write("field.obj", |w| Ok(field.write_obj(w)?))?;
    out.write("field.csv", |w| Ok(field.write_csv(w)?))?;
    let summary = Summary {
        nodes: built.domain.n_inside(),
        iterations: stats.iterations,
        residual: stats.residual,
        max_error: built.error(&field)?,
    };
    out.write_json("solve.json", &summary)?;
    print!(
        "{} nodes, {} Newton steps, residual {:.3e}",
        summary.nodes, summary.iterations, summary.residual
    );
    match summary.max_error {
        Some(e) => println!(", max error {e:.3e}"),
        None => println!(),
    }
    Ok(())
}
