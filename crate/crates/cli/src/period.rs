use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::sync::Mutex;

use anyhow::{Context, Result};
use clap::Args;
use cmc_forge::periods::{
    assemble_report, first_period_b_max, snap_truncation, solve_first_period, solve_first_period_in_a,
    solve_second_period, FirstPeriodEvaluator, PeriodSample, C1_EDGE,
};
use cmc_forge::sister::curve_k_t;
use cmc_forge::{CurveKind, PeriodOptions, SolveOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::usage;
use crate::output::OutDir;

/// Overrides for [`PeriodOptions`]; the solver settings only come from the
/// config file.
#[derive(Args, Serialize)]
pub struct PeriodArgs {
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    n_start: Option<f64>,
    #[arg(long)]
    n_step: Option<f64>,
    #[arg(long)]
    n_max: Option<f64>,
    #[arg(long)]
    n_tol: Option<f64>,
    #[arg(long)]
    p_tol: Option<f64>,
    #[arg(long)]
    b_min: Option<f64>,
    #[arg(long)]
    scan_points: Option<usize>,
    #[arg(long)]
    a_min: Option<f64>,
    #[arg(long)]
    a_max: Option<f64>,
    #[arg(long)]
    a_scan_h: Option<f64>,
    #[arg(long)]
    angle_tol: Option<f64>,
    #[arg(long)]
    angle_points: Option<usize>,
}

fn write_pairs(out: &mut OutDir, name: &str, header: &str, rows: &[(f64, f64)]) -> Result<()> {
    out.write(name, |w| {
        writeln!(w, "{header}")?;
        for (x, y) in rows {
            writeln!(w, "{x:?},{y:?}")?;
        }
        Ok(())
    })
}

// ---- period-scan

#[derive(Args, Serialize)]
pub struct ScanArgs {
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    b_min: Option<f64>,
    /// Defaults to the upper end of the first-period bracket.
    #[arg(long)]
    b_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    /// Keep rows already in `scan.partial.csv`.
    #[arg(long)]
    #[serde(skip)]
    pub resume: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub a: f64,
    pub phi: f64,
    /// Snapped to a multiple of `a`.
    pub n: f64,
    pub b_min: f64,
    pub b_max: Option<f64>,
    pub points: usize,
    pub h: f64,
    pub solver: SolveOptions,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            phi: std::f64::consts::FRAC_PI_3,
            n: 4.0,
            b_min: 1e-3,
            b_max: None,
            points: 8,
            h: 0.025,
            solver: SolveOptions::default(),
        }
    }
}

const SCAN_HEADER: &str = "b,p,p_coarse,p_fine,residual";
const PARTIAL: &str = "scan.partial.csv";

fn scan_row(s: &PeriodSample) -> String {
    format!("{:?},{:?},{:?},{:?},{:?}", s.b, s.p, s.p_coarse, s.p_fine, s.residual)
}

/// Rows of a checkpoint file keyed by the bits of `b`; a torn last line is
/// dropped.
fn read_partial(text: &str) -> BTreeMap<u64, String> {
    text.lines()
        .skip(1)
        .filter_map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 || fields.iter().any(|f| f.parse::<f64>().is_err()) {
                return None;
            }
            Some((fields[0].parse::<f64>().ok()?.to_bits(), line.to_string()))
        })
        .collect()
}

/// `p(b)` on an even grid, one checkpointed row per grid point. Floats are
/// written in shortest round-trip form.
pub fn run_scan(cfg: &ScanConfig, resume: bool, out: &mut OutDir) -> Result<()> {
    let b_max = match cfg.b_max {
        Some(b) => b,
        None => first_period_b_max(cfg.a, cfg.phi)?,
    };
    if cfg.points == 0 || !(cfg.b_min < b_max) {
        return Err(usage(format!(
            "empty scan range [{}, {b_max}] with {} points",
            cfg.b_min, cfg.points
        )));
    }
    let bs: Vec<f64> = if cfg.points == 1 {
        vec![cfg.b_min]
    } else {
        (0..cfg.points)
            .map(|i| cfg.b_min + (b_max - cfg.b_min) * i as f64 / (cfg.points - 1) as f64)
            .collect()
    };
    let n = snap_truncation(cfg.a, cfg.n);
    let partial = out.path(PARTIAL);
    let mut done = if resume && partial.exists() {
        read_partial(&fs::read_to_string(&partial).with_context(|| format!("reading {}", partial.display()))?)
    } else {
        BTreeMap::new()
    };
    done.retain(|bits, _| bs.iter().any(|b| b.to_bits() == *bits));
    // rewrite the checkpoint with the surviving rows only
    let mut text = format!("{SCAN_HEADER}\n");
    for row in done.values() {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(&partial, text).with_context(|| format!("writing {}", partial.display()))?;
    let todo: Vec<f64> = bs
        .iter()
        .copied()
        .filter(|b| !done.contains_key(&b.to_bits()))
        .collect();
    println!("{} of {} rows to compute at n = {n}", todo.len(), bs.len());
    if !todo.is_empty() {
        let file = Mutex::new(OpenOptions::new().append(true).open(&partial)?);
        let fresh: Vec<(u64, String)> = todo
            .par_iter()
            .map(|&b| -> Result<(u64, String)> {
                // a fresh evaluator per row: warm starts would make rows depend on their order
                let row = scan_row(&FirstPeriodEvaluator::new(cfg.a, cfg.phi, n, cfg.h, cfg.solver)?.eval(b)?);
                let mut f = file.lock().expect("checkpoint lock");
                writeln!(f, "{row}")?;
                f.flush()?;
                Ok((b.to_bits(), row))
            })
            .collect::<Result<_>>()?;
        done.extend(fresh);
    }
    let mut rows: Vec<(f64, &String)> = done.iter().map(|(bits, row)| (f64::from_bits(*bits), row)).collect();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    out.write("scan.csv", |w| {
        writeln!(w, "{SCAN_HEADER}")?;
        for (_, row) in &rows {
            writeln!(w, "{row}")?;
        }
        Ok(())
    })?;
    let p: Vec<f64> = rows
        .iter()
        .map(|(_, r)| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let changes = p.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    println!("{} rows, {changes} sign change(s) of p", rows.len());
    Ok(())
}

// ---- period1

#[derive(Args, Serialize)]
pub struct Period1Args {
    /// Solve for `b` at this `a`.
    #[arg(long)]
    a: Option<f64>,
    /// Solve for the smallest `a` at this `b`.
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    options: PeriodArgs,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Period1Config {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub phi: f64,
    #[serde(flatten)]
    pub options: PeriodOptions,
}

impl Default for Period1Config {
    fn default() -> Self {
        Self {
            a: None,
            b: None,
            phi: std::f64::consts::FRAC_PI_3,
            options: PeriodOptions::default(),
        }
    }
}

pub fn run_period1(cfg: &Period1Config, out: &mut OutDir) -> Result<()> {
    let (root, param) = match (cfg.a, cfg.b) {
        (Some(a), None) => (solve_first_period(a, cfg.phi, &cfg.options)?, "b"),
        (None, Some(b)) => (solve_first_period_in_a(b, cfg.phi, &cfg.options)?, "a"),
        _ => return Err(usage("give exactly one of a and b")),
    };
    out.write_json("period1.json", &root)?;
    write_pairs(out, "period1_scan.csv", &format!("{param},p"), &root.scan)?;
    println!(
        "a = {:.6}, b = {:.6}, p = {:.3e} (n = {}, h = {}), {} sign change(s) on the scan",
        root.a,
        root.b,
        root.p,
        root.n_used,
        root.h_used,
        root.sign_changes.len()
    );
    Ok(())
}

// ---- period2 and knoid

#[derive(Args, Serialize)]
pub struct KArgs {
    #[arg(long)]
    k: Option<u32>,
    #[command(flatten)]
    #[serde(flatten)]
    options: PeriodArgs,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct KConfig {
    pub k: u32,
    #[serde(flatten)]
    pub options: PeriodOptions,
}

impl Default for KConfig {
    fn default() -> Self {
        Self {
            k: 3,
            options: PeriodOptions::default(),
        }
    }
}

pub fn run_period2(cfg: &KConfig, out: &mut OutDir) -> Result<()> {
    let second = solve_second_period(cfg.k, &cfg.options)?;
    out.write_json("period2.json", &second)?;
    write_pairs(out, "period2_scan.csv", "b,A", &second.scan)?;
    println!(
        "k = {}: phi = {:.6}, b = {:.6}, A = {:.8} (pi/k = {:.8})",
        second.k,
        second.phi,
        second.b,
        second.period.angle,
        std::f64::consts::PI / f64::from(second.k)
    );
    Ok(())
}

pub fn run_knoid(cfg: &KConfig, out: &mut OutDir) -> Result<()> {
    let knoid = assemble_report(cfg.k, &cfg.options)?;
    out.write_json("report.json", &knoid.report)?;
    out.write("piece.obj", |w| Ok(knoid.field.write_obj(w)?))?;
    out.write("mirror_curve.csv", |w| Ok(knoid.curve.write_csv(w)?))?;
    out.write("twist_profile.csv", |w| {
        writeln!(w, "t,alpha,rate")?;
        for &t in knoid.profile.knots() {
            writeln!(w, "{t:?},{:?},{:?}", knoid.profile.alpha(t), knoid.profile.rate(t))?;
        }
        Ok(())
    })?;
    write_pairs(out, "period1_scan.csv", "a,p", &knoid.first.scan)?;
    write_pairs(out, "period2_scan.csv", "b,A", &knoid.second.scan)?;
    let c1 = curve_k_t(&knoid.field, C1_EDGE)?;
    out.write("sister_c1.csv", |w| {
        Ok(c1.write_csv(w, c1.kind().unwrap_or(CurveKind::Horizontal))?)
    })?;
    let r = &knoid.report;
    println!(
        "k = {}: a = {:.6}, b = {:.6}, phi = {:.6}, p = {:.2e}, A = {:.8}, chi = {}, genus = {}",
        r.k, r.a, r.b, r.phi, r.p, r.angle, r.chi, r.genus
    );
    Ok(())
}
