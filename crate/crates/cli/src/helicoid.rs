use anyhow::Result;
use clap::Args;
use cmc_forge::helicoid::alpha_for_width;
use cmc_forge::HelicoidModel;
use serde::{Deserialize, Serialize};

use crate::config::usage;
use crate::output::OutDir;

#[derive(Args, Serialize)]
pub struct HelicoidArgs {
    /// Pitch parameter; give this or --width.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Strip width `a`, inverted to the pitch.
    #[arg(long, allow_negative_numbers = true)]
    width: Option<f64>,
    /// Mesh samples along `u`.
    #[arg(long)]
    nu: Option<usize>,
    /// Mesh samples along `v`.
    #[arg(long)]
    nv: Option<usize>,
    /// The mesh covers `v ∈ [−v_max, v_max]`.
    #[arg(long)]
    v_max: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct HelicoidConfig {
    pub alpha: Option<f64>,
    pub width: Option<f64>,
    pub nu: usize,
    pub nv: usize,
    pub v_max: f64,
}

impl Default for HelicoidConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            width: None,
            nu: 65,
            nv: 33,
            v_max: 1.0,
        }
    }
}

#[derive(Serialize)]
struct Summary {
    alpha: f64,
    u_period: f64,
    width: f64,
    periodicity_residual: f64,
}

/// Writes `helicoid.obj` (fundamental piece over `[−U, U]`), the `(u, ψ, G)`
/// table and a summary.
pub fn run(cfg: &HelicoidConfig, out: &mut OutDir) -> Result<()> {
    let alpha = match (cfg.alpha, cfg.width) {
        (Some(a), None) => a,
        (None, Some(w)) => alpha_for_width(w)?,
        _ => return Err(usage("give exactly one of alpha and width")),
    };
    let model = HelicoidModel::with_alpha(alpha)?;
    let u = model.u_period();
    out.write("helicoid.obj", |w| {
        Ok(model.write_obj(w, (-u, u), (-cfg.v_max, cfg.v_max), cfg.nu, cfg.nv)?)
    })?;
    out.write("helicoid_table.csv", |w| Ok(model.write_table_csv(w)?))?;
    let summary = Summary {
        alpha,
        u_period: u,
        width: model.width(),
        periodicity_residual: model.periodicity_residual(),
    };
    out.write_json("helicoid.json", &summary)?;
    println!("alpha = {alpha}, U = {u:.6}, width = {:.6}", summary.width);
    Ok(())
}
