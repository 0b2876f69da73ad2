use std::io::Write;

use anyhow::Result;
use clap::{Args, ValueEnum};
use cmc_forge::etau::{enclosed_area, holonomy, horizontal_lift};
use cmc_forge::{BaseLoop, Chart, ManifoldParams};
use serde::{Deserialize, Serialize};

use crate::config::usage;
use crate::output::OutDir;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LoopShape {
    Circle,
    Polygon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ChartName {
    Symmetric,
    DanielHauswirth,
}

#[derive(Args, Serialize)]
pub struct LiftArgs {
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long, value_enum)]
    chart: Option<ChartName>,
    #[arg(long, value_enum)]
    shape: Option<LoopShape>,
    #[arg(long)]
    radius: Option<f64>,
    /// Samples per loop (circle) or per edge (polygon).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    z0: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LiftConfig {
    pub kappa: f64,
    pub tau: f64,
    pub chart: ChartName,
    pub shape: LoopShape,
    pub center: [f64; 2],
    pub radius: f64,
    /// Polygon vertices; only read for `shape = "polygon"`.
    pub vertices: Vec<[f64; 2]>,
    pub samples: usize,
    pub z0: f64,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self {
            kappa: 0.0,
            tau: 0.5,
            chart: ChartName::Symmetric,
            shape: LoopShape::Circle,
            center: [0.0, 0.0],
            radius: 1.0,
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            samples: 256,
            z0: 0.0,
        }
    }
}

#[derive(Serialize)]
struct Summary {
    area: f64,
    holonomy: f64,
    lift_rise: f64,
}

/// Horizontal lift of a base loop (`lift.csv`) and its holonomy.
pub fn run(cfg: &LiftConfig, out: &mut OutDir) -> Result<()> {
    let chart = match cfg.chart {
        ChartName::Symmetric => Chart::Symmetric,
        ChartName::DanielHauswirth => Chart::DanielHauswirth,
    };
    let params = ManifoldParams::new(cfg.kappa, cfg.tau, chart)?;
    let lp = match cfg.shape {
        LoopShape::Circle => BaseLoop::circle(cfg.center, cfg.radius, cfg.samples, true)?,
        LoopShape::Polygon => {
            if cfg.vertices.len() < 3 {
                return Err(usage("a polygon needs at least three vertices"));
            }
            BaseLoop::polygon(&cfg.vertices, cfg.samples)?
        }
    };
    let lift = horizontal_lift(&params, &lp, cfg.z0)?;
    out.write("lift.csv", |w| {
        writeln!(w, "x,y,z")?;
        for p in &lift {
            writeln!(w, "{:.12e},{:.12e},{:.12e}", p.x, p.y, p.z)?;
        }
        Ok(())
    })?;
    let summary = Summary {
        area: enclosed_area(&params, &lp)?,
        holonomy: holonomy(&params, &lp)?,
        lift_rise: lift[lift.len() - 1].z - lift[0].z,
    };
    out.write_json("lift.json", &summary)?;
    println!(
        "area = {:.8}, holonomy = {:.8}, lift rise = {:.8}",
        summary.area, summary.holonomy, summary.lift_rise
    );
    Ok(())
}
