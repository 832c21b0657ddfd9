//! Command-line driver for convergence studies, contrast sweeps and field
//! dumps.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hcife::study::{
    emit_solution_field, level_guard, parse_levels, run_contrast_sweep, run_convergence_study,
    run_level, write_study, write_sweep, StudyConfig,
};
use hcife::Result;

#[derive(Parser)]
#[command(
    version,
    about = "Immersed P1 finite elements for high-contrast interface problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study over a range of levels.
    Run(Common),
    /// Contrast sweep at a fixed level.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Level of the sweep.
        #[arg(long)]
        level: Option<u32>,
        /// Comma-separated ρ⁺ values.
        #[arg(long)]
        rho_list: Option<String>,
    },
    /// Solve at one level and write the sampled solution as `x,y,side,value`.
    Field {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: u32,
    },
}

/// Flags that override values read from `--config`.
#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// main, e2, e3, e4 or e5.
    #[arg(long)]
    method: Option<String>,
    /// Inclusive level range `A..B`.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    rho_plus: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gamma_f: Option<f64>,
    /// midpoint-tangent or two-point.
    #[arg(long)]
    basis: Option<String>,
    /// broken or vertex.
    #[arg(long)]
    layout: Option<String>,
    /// chord or curved.
    #[arg(long)]
    regions: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Permit levels above the desk-scale limit.
    #[arg(long)]
    allow_large: bool,
}

impl Common {
    fn resolve(&self) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(p) => StudyConfig::from_file(p)?,
            None => StudyConfig::default(),
        };
        if let Some(m) = &self.method {
            cfg.set("method", m)?;
        }
        if let Some(l) = &self.levels {
            (cfg.l_min, cfg.l_max) = parse_levels(l)?;
        }
        if let Some(r) = self.rho_plus {
            cfg.rho_plus = r;
        }
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        if let Some(g) = self.gamma_f {
            cfg.gamma_f = g;
        }
        if let Some(b) = &self.basis {
            cfg.set("basis", b)?;
        }
        if let Some(l) = &self.layout {
            cfg.set("layout", l)?;
        }
        if let Some(r) = &self.regions {
            cfg.set("regions", r)?;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        cfg.allow_large |= self.allow_large;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn announce_memory(levels: impl IntoIterator<Item = u32>, allow_large: bool) -> Result<()> {
    for (l, bytes) in level_guard(levels, allow_large)? {
        eprintln!(
            "level {l}: estimated memory {:.2} GiB",
            bytes as f64 / (1u64 << 30) as f64
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.resolve()?;
            announce_memory(cfg.l_min..=cfg.l_max, cfg.allow_large)?;
            let table = run_convergence_study(&cfg)?;
            print!("{}", table.to_markdown(&cfg));
            for p in write_study(&cfg, &table)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Sweep {
            common,
            level,
            rho_list,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(l) = level {
                cfg.sweep_level = l;
            }
            if let Some(r) = rho_list {
                cfg.set("sweep", &r)?;
            }
            cfg.validate()?;
            announce_memory([cfg.sweep_level], cfg.allow_large)?;
            let rows = run_contrast_sweep(&cfg)?;
            print!("{}", hcife::study::sweep_markdown(&cfg, &rows));
            for p in write_sweep(&cfg, &rows)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Field { common, level } => {
            let cfg = common.resolve()?;
            announce_memory([level], cfg.allow_large)?;
            let run = run_level(&cfg, level, cfg.rho_plus)?;
            let path = cfg
                .out_dir
                .join(format!("field_{}_l{level}.csv", cfg.method.name()));
            emit_solution_field(&run.disc, &run.uh, &path)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
