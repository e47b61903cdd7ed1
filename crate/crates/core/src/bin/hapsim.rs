use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hapsim::config::ScenarioConfig;
use hapsim::error::{Error, Result};
use hapsim::harness::output::{self, DumpFlags};
use hapsim::harness::{resolve_workers, run_sweep_with, SweepSpec};

#[derive(Parser)]
#[command(name = "hapsim", version, about = "Monte Carlo simulator for HAPS massive MIMO NOMA downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one configuration key and write sweep.csv and drops.csv.
    Simulate {
        /// Scenario file of `key = value` lines; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Configuration key to sweep, e.g. p_max_dbm or access_mode.
        #[arg(long)]
        sweep: String,
        /// Comma-separated values for the swept key.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 200)]
        drops: u64,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; SIM_WORKERS overrides.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Array layout such as 18x4x2.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long)]
        dump_channels: bool,
        #[arg(long)]
        dump_plan: bool,
        #[arg(long)]
        dump_allocations: bool,
    },
    /// Print a gnuplot script for a sweep.csv.
    Gnuplot {
        #[arg(long, default_value = "sweep.csv")]
        csv: String,
        #[arg(long, default_value = "value")]
        xlabel: String,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::ConfigParse { .. } | Error::OddElementCount(_) => 2,
        _ => 1,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    config: Option<PathBuf>,
    sweep: String,
    values: Vec<String>,
    drops: u64,
    out: PathBuf,
    workers: usize,
    seed: Option<u64>,
    preset: Option<String>,
    confidence: f64,
    flags: DumpFlags,
) -> Result<bool> {
    let mut cfg = match &config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(p) = &preset {
        cfg.apply_preset(p)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Config(format!("confidence must be in (0, 1), got {confidence}")));
    }
    let spec = SweepSpec {
        base_config: cfg,
        swept_parameter: sweep,
        values,
        n_drops: drops,
        confidence,
        workers: resolve_workers(workers),
    };
    let (result, dumps) = run_sweep_with(&spec, |_, o| Ok(flags.rows(o)))?;

    fs::create_dir_all(&out)?;
    let mut w = create(&out, "sweep.csv")?;
    output::write_sweep_csv(&result, &mut w)?;
    w.flush()?;
    let mut w = create(&out, "drops.csv")?;
    output::write_drops_csv(&result, &mut w)?;
    w.flush()?;
    if flags.any() {
        let (n, m) = (spec.base_config.user_antennas, spec.base_config.elements_per_sector);
        for (i, per_drop) in dumps.iter().enumerate() {
            let headers = [output::channel_header(n, m), format!("{}\n", output::PLAN_HEADER),
                format!("{}\n", output::ALLOCATION_HEADER)];
            for (k, name) in ["channels", "plan", "allocations"].iter().enumerate() {
                if per_drop.first().is_none_or(|rows| rows[k].is_none()) {
                    continue;
                }
                let mut w = create(&out, &format!("{name}_{i}.csv"))?;
                w.write_all(headers[k].as_bytes())?;
                for rows in per_drop {
                    if let Some(text) = &rows[k] {
                        w.write_all(text.as_bytes())?;
                    }
                }
                w.flush()?;
            }
        }
    }
    Ok(result.points.iter().any(|p| p.all_infeasible()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Gnuplot { csv, xlabel } => {
            print!("{}", output::gnuplot_script(&csv, &xlabel));
            ExitCode::SUCCESS
        }
        Command::Simulate {
            config,
            sweep,
            values,
            drops,
            out,
            workers,
            seed,
            preset,
            confidence,
            dump_channels,
            dump_plan,
            dump_allocations,
        } => {
            let flags = DumpFlags { channels: dump_channels, plan: dump_plan, allocations: dump_allocations };
            match simulate(config, sweep, values, drops, out, workers, seed, preset, confidence, flags) {
                Ok(false) => ExitCode::SUCCESS,
                Ok(true) => {
                    eprintln!("hapsim: every drop of at least one sweep point was infeasible");
                    ExitCode::from(3)
                }
                Err(e) => {
                    eprintln!("hapsim: {e}");
                    ExitCode::from(exit_code(&e))
                }
            }
        }
    }
}
