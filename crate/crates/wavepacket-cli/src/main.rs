use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use wavepacket::residual;
use wavepacket_cli::config::ExperimentConfig;
use wavepacket_cli::experiments::{self as ex, Check};
use wavepacket_cli::manifest;

#[derive(Parser, Debug)]
#[command(name = "wavepacket", version, about = "Wave-packet approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated eps values (overrides `eps`).
    #[arg(long, global = true)]
    eps_list: Option<String>,
    /// Fixed fast grid size (overrides the points rule).
    #[arg(long, global = true)]
    n_points: Option<usize>,
    /// Slow horizon; runs cover `t <= horizon / eps^2`.
    #[arg(long, global = true)]
    t_horizon: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for eps sweeps and kernel rows.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Soliton, conservation and splitting-order checks of the NLS solver.
    NlsCheck,
    /// Residual norms and order fits over the eps sweep.
    Residuals,
    /// Admissible data and long runs for each eps.
    Evolve,
    /// Long runs for each eps and the fitted error order.
    ErrorScaling,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::NlsCheck => "nls-check",
            Command::Residuals => "residuals",
            Command::Evolve => "evolve",
            Command::ErrorScaling => "error-scaling",
        }
    }

    fn preset(self) -> ExperimentConfig {
        match self {
            Command::NlsCheck | Command::Residuals => ExperimentConfig::residual_default(),
            Command::Evolve | Command::ErrorScaling => ExperimentConfig::evolution_default(),
        }
    }
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p, cli.command.preset())?,
        None => cli.command.preset(),
    };
    if let Some(v) = &cli.eps_list {
        cfg.set("eps", v)?;
    }
    if let Some(n) = cli.n_points {
        cfg.set("n_points", &n.to_string())?;
    }
    if let Some(h) = cli.t_horizon {
        cfg.set("horizon", &h.to_string())?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(checks: &[Check]) {
    for c in checks {
        let tag = if c.pass { "ok  " } else { "FAIL" };
        println!("{tag} {:<32} {:>12.5e}  {}", c.name, c.value, c.target);
    }
}

fn run_file(eps: f64) -> String {
    format!("run_eps_{eps:?}.csv")
}

/// Runs the subcommand; `Ok(false)` means a result fell outside its band.
fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<bool> {
    let out = &cfg.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut files = Vec::new();
    let pass = match cmd {
        Command::NlsCheck => {
            let checks = ex::nls_check(cfg)?;
            report(&checks);
            ex::write_checks(&checks, &out.join("nls_report.csv"))?;
            files.push("nls_report.csv".to_string());
            ex::all_pass(&checks)
        }
        Command::Residuals => residuals(cfg, out, &mut files)?,
        Command::Evolve => {
            let mut all = true;
            let mut adm = Vec::new();
            for &eps in &cfg.epsilons {
                adm.push(ex::admissible_at(cfg, eps)?);
                let ck = (cfg.solver.checkpoint_every > 0)
                    .then(|| out.join(format!("checkpoint_eps_{eps:?}.bin")));
                let run = ex::evolve_eps(cfg, eps, ck.as_deref())?;
                write_run(&run.report, out, &mut files)?;
                println!(
                    "eps {eps}: {} at t = {}, max error {:.4e} (ratio to eps^1.5 {:.3})",
                    run.report.termination.label(),
                    run.report.rows.last().map_or(0.0, |r| r.t),
                    run.report.max_error(),
                    run.report.max_error() / eps.powf(1.5)
                );
                all &= run.report.completed();
            }
            ex::write_admissible(&adm, &out.join("admissible.csv"))?;
            files.push("admissible.csv".into());
            all
        }
        Command::ErrorScaling => {
            let sc = ex::error_scaling(cfg)?;
            for r in &sc.runs {
                write_run(&r.report, out, &mut files)?;
            }
            let checks = sc.checks(cfg.error_constant);
            report(&checks);
            ex::write_checks(&checks, &out.join("scaling.csv"))?;
            files.push("scaling.csv".into());
            ex::all_pass(&checks)
        }
    };
    manifest::write_manifest(out, cmd.name(), &cfg.echo(), pass, &files)?;
    Ok(pass)
}

fn write_run(report: &wavepacket::evolve::RunReport, out: &Path, files: &mut Vec<String>) -> Result<()> {
    let name = run_file(report.epsilon);
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    std::fs::write(out.join(&name), buf)?;
    files.push(name);
    Ok(())
}

fn residuals(cfg: &ExperimentConfig, out: &Path, files: &mut Vec<String>) -> Result<bool> {
    let sweep = ex::residual_sweep(cfg)?;
    let mut buf = Vec::new();
    residual::write_convergence_csv(&sweep.rows, &mut buf)?;
    std::fs::write(out.join("residuals.csv"), buf)?;
    files.push("residuals.csv".into());

    let mut slopes = Vec::new();
    for f in &sweep.fits {
        let ok = f.in_band(ex::RESIDUAL_ORDER, ex::RESIDUAL_BAND, ex::RESIDUAL_MIN_R2);
        let (s, r2) = f.fit.as_ref().map_or((None, None), |x| (x.slope, x.r_squared));
        println!(
            "{} {:<12} slope {}",
            if ok { "ok  " } else { "FAIL" },
            f.name,
            match (&f.fit, s) {
                (None, _) => "not fitted (needs three eps)".to_string(),
                (Some(_), None) => "floor".to_string(),
                (Some(_), Some(v)) => format!("{v:.3} (r2 {:.4})", r2.unwrap_or(0.0)),
            }
        );
        slopes.push((f.name.clone(), f.fit.clone(), ok));
    }

    let ms = wavepacket::map_jobs(&cfg.epsilons, |&e| ex::multiscale_at(cfg, e))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    if cfg.epsilons.len() >= 3 {
        for (i, name) in ex::Multiscale::NAMES.iter().enumerate() {
            let y: Vec<f64> = ms.iter().map(|m| m.as_array()[i]).collect();
            let fit = residual::order_fit(&cfg.epsilons, &y, residual::FIT_FLOOR)?;
            let ok = fit
                .slope
                .map_or(true, |s| (s - ex::Multiscale::ORDERS[i]).abs() <= ex::RESIDUAL_BAND);
            slopes.push((name.to_string(), Some(fit), ok));
        }
    }
    ex::write_slopes(&slopes, &out.join("slopes.csv"))?;
    files.push("slopes.csv".into());
    Ok(sweep.pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = config(&cli).and_then(|cfg| execute(cli.command, &cfg));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
