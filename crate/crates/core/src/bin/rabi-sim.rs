use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rabi_dme::exec::Exec;
use rabi_dme::scenario::{
    list_presets, parse_config, parse_config_with_preset, parse_preset_name, planned_runs, preset_config, simulate,
    ScenarioConfig, SolverChoice, TruncChoice,
};
use rabi_dme::{Error, Result};

#[derive(Parser)]
#[command(name = "rabi-sim", version, about = "Dissipative quantum Rabi model: GKSL and dressed master equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV series plus provenance.
    Simulate {
        /// Scenario file (TOML). Optional when --preset is given.
        config: Option<PathBuf>,
        /// gksl, dme-dressed, dme-bare or all.
        #[arg(long)]
        solver: Option<String>,
        /// Output directory [default: the config's `output`, else ./out].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fock cutoff: an integer or `auto`.
        #[arg(long)]
        q1: Option<String>,
        /// Preset name such as figure14.
        #[arg(long)]
        preset: Option<String>,
        /// Disable the data-parallel paths.
        #[arg(long)]
        sequential: bool,
    },
    /// List the built-in presets.
    ListPresets,
    /// Parse and validate a scenario file without running it.
    Validate { config: PathBuf },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load(config: Option<&Path>, preset: Option<&str>) -> Result<ScenarioConfig> {
    let figure = preset
        .map(|p| parse_preset_name(p).ok_or_else(|| Error::Validation(format!("unknown preset `{p}`"))))
        .transpose()?;
    match (config, figure) {
        (Some(path), Some(n)) => parse_config_with_preset(&read(path)?, n),
        (Some(path), None) => parse_config(&read(path)?),
        (None, Some(n)) => preset_config(n),
        (None, None) => Err(Error::Validation("give a config file or --preset".into())),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ListPresets => {
            for (n, summary) in list_presets() {
                let cfg = preset_config(n)?;
                println!(
                    "figure{n:<3} g={:<5} Omega0={:<7} rates={:<6e} t_max={:<6} {summary}",
                    cfg.model.g, cfg.model.omega0, cfg.rates.kappa0, cfg.grid.t_max
                );
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = parse_config(&read(&config)?)?;
            let runs: Vec<String> = planned_runs(&cfg).iter().map(|r| r.tag()).collect();
            println!("ok: {} (hash {}), runs: {}", config.display(), cfg.hash(), runs.join(", "));
            Ok(())
        }
        Command::Simulate { config, solver, out, q1, preset, sequential } => {
            let mut cfg = load(config.as_deref(), preset.as_deref())?;
            if let Some(s) = solver {
                cfg = cfg.with_solver(s.parse::<SolverChoice>()?)?;
            }
            if let Some(q) = q1 {
                cfg.trunc = q.parse::<TruncChoice>()?;
            }
            let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let exec = if sequential { Exec::Sequential } else { Exec::Parallel };
            let (result, files) = simulate(&cfg, &dir, exec)?;
            println!("Q1 = {}, tail mass {:.3e}, converged: {}", result.trunc.q1(), result.tail_mass, result.converged);
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
