use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use intercept_core::eval::{build_report, montecarlo_runs, MovingScenario};
use intercept_core::simloop::write_steps_csv;
use intercept_core::{compare, run, ConfigFile, Controller, MonteCarloSpec};

#[derive(Parser, Debug)]
#[command(name = "intercept", version, about = "Vision-guided multicopter interception simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// Scenario file (JSON). Defaults apply to every omitted field.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Controller variant.
    #[arg(long, value_parser = parse_controller)]
    controller: Option<Controller>,
    /// Suppress stdout output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run one engagement; writes summary.json and steps.csv.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Static-target suite; writes report.json and one CSV per run.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Proposed vs pursuit on the moving-target models; writes compare.csv/json.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check a configuration document and exit.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn parse_controller(s: &str) -> Result<Controller, String> {
    s.parse()
}

fn load(common: &Common) -> Result<ConfigFile> {
    let mut cfg = match &common.config {
        Some(p) => ConfigFile::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(c) = common.controller {
        cfg.scenario.controller = c;
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> Result<Option<&Path>> {
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(common.out.as_deref())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))
}

fn csv_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    match cli.command {
        Cmd::Run { common } => {
            let cfg = load(&common)?;
            let output = run(&cfg.scenario)?;
            let json = output.summary.to_json();
            if let Some(dir) = out_dir(&common)? {
                write_text(&dir.join("summary.json"), &json)?;
                write_steps_csv(&output.records, csv_file(&dir.join("steps.csv"))?)?;
            }
            if !common.quiet {
                println!("{json}");
            }
        }
        Cmd::Montecarlo { common, runs, jobs } => {
            let cfg = load(&common)?;
            let spec = MonteCarloSpec {
                runs: runs.unwrap_or(cfg.montecarlo.runs),
                sampler: cfg.montecarlo.sampler,
                controller: cfg.scenario.controller,
                seed: cfg.scenario.seed,
                base: cfg.scenario,
            };
            let outputs = montecarlo_runs(&spec, jobs)?;
            let report = build_report(&spec, &outputs)?;
            let json = report.to_json();
            if let Some(dir) = out_dir(&common)? {
                write_text(&dir.join("report.json"), &json)?;
                let runs_dir = dir.join("runs");
                fs::create_dir_all(&runs_dir)?;
                for (i, o) in outputs.iter().enumerate() {
                    write_steps_csv(&o.records, csv_file(&runs_dir.join(format!("run-{i:03}.csv")))?)?;
                }
            }
            if !common.quiet {
                println!("{json}");
            }
        }
        Cmd::Compare { common, jobs } => {
            let cfg = load(&common)?;
            let (table, _, _) = compare(&cfg.scenario, &MovingScenario::ALL, jobs)?;
            let json = table.to_json();
            if let Some(dir) = out_dir(&common)? {
                write_text(&dir.join("compare.json"), &json)?;
                table.write_csv(csv_file(&dir.join("compare.csv"))?)?;
            }
            if !common.quiet {
                table.write_csv(std::io::stdout())?;
            }
        }
        Cmd::ValidateConfig { config, quiet } => {
            ConfigFile::load(&config).with_context(|| format!("validating {}", config.display()))?;
            if !quiet {
                println!("{}: ok", config.display());
            }
        }
    }
    Ok(())
}
