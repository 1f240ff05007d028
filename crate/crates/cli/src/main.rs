//! `bmix`: experiment runner for noisy Bernoulli maps.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for configuration
//! errors, 3 for I/O and other runtime errors.

mod commands;
mod config;
mod manifest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use bernoulli_mix::io::write_json;
use clap::{Parser, Subcommand};

use config::{ConfigError, ExperimentConfig, Overrides};
use manifest::{Recorder, RunManifest, CSV_SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "bmix", version, about = "Mixing and dissipation experiments for noisy Bernoulli maps")]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of hardware threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Map preset (doubling, intro3, quad2d, identity, tripling, rect2d, expandingN).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Grid of base^K cells per axis, base being the map's lattice base.
    #[arg(long, global = true)]
    grid_exp: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Check the map's structural assumptions and print p_min, p_max.
    Validate,
    /// Family-worst-case t_mix over the ε and δ lists.
    SweepMix,
    /// t_dis by power iteration over the ε and δ lists.
    SweepDis,
    /// Eigen-inequality certificate for the kernel's bump profile.
    VerifyEigen,
    /// Leakage of piecewise-constant densities against the perimeter bound.
    VerifyPcmix,
    /// t_dis(δ) ≤ t_mix(δ²/4) and the converse bound.
    VerifyDuality,
    /// Exact Fourier evolution for x -> N x, cross-checked against the grid.
    Spectral,
    /// Particle histograms against density evolution.
    McCrosscheck,
    /// Summary of every manifest in the output directory.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::SweepMix => "sweep-mix",
            Command::SweepDis => "sweep-dis",
            Command::VerifyEigen => "verify-eigen",
            Command::VerifyPcmix => "verify-pcmix",
            Command::VerifyDuality => "verify-duality",
            Command::Spectral => "spectral",
            Command::McCrosscheck => "mc-crosscheck",
            Command::Report => "report",
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let t0 = Instant::now();
    let name = cli.command.name();

    if cli.command == Command::Report {
        let out = cli.out.clone().or(config.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
        let mut rec = Recorder::new(&out);
        report::emit_report(&out, &mut rec)?;
        let manifest = RunManifest {
            command: name.into(),
            tool: "bmix".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: String::new(),
            csv_schema_version: CSV_SCHEMA_VERSION,
            map: String::new(),
            grid: 0,
            outputs: rec.outputs,
            checks: rec.checks,
            warnings: rec.warnings,
            wall_ms: t0.elapsed().as_millis(),
        };
        write_json(&out.join(RunManifest::file_name(name)), &manifest)?;
        return Ok(true);
    }

    let ov = Overrides { out: cli.out.clone(), seed: cli.seed, preset: cli.preset.clone(), grid_exp: cli.grid_exp };
    let res = config.resolve(&ov)?;
    let mut rec = Recorder::new(&res.out);
    match cli.command {
        Command::Validate => commands::validate(&res, &mut rec)?,
        Command::SweepMix => commands::sweep_mix(&res, &mut rec)?,
        Command::SweepDis => commands::sweep_dis(&res, &mut rec)?,
        Command::VerifyEigen => commands::verify_eigen(&res, &mut rec)?,
        Command::VerifyPcmix => commands::verify_pcmix(&res, &mut rec)?,
        Command::VerifyDuality => commands::verify_duality(&res, &mut rec)?,
        Command::Spectral => commands::spectral(&res, &mut rec)?,
        Command::McCrosscheck => commands::mc_crosscheck(&res, &mut rec)?,
        Command::Report => unreachable!(),
    }
    for c in &rec.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let manifest = RunManifest {
        command: name.into(),
        tool: "bmix".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: res.hash.clone(),
        csv_schema_version: CSV_SCHEMA_VERSION,
        map: res.map.name.clone(),
        grid: if cli.command == Command::Validate { 0 } else { res.grid_size()? },
        outputs: rec.outputs,
        checks: rec.checks,
        warnings: rec.warnings,
        wall_ms: t0.elapsed().as_millis(),
    };
    let pass = manifest.passed();
    let path = res.out.join(RunManifest::file_name(name));
    write_json(&path, &manifest)?;
    println!("manifest: {}", path.display());
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
