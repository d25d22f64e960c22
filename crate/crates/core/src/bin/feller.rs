use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use feller::cli::{self, Overrides, DEFAULT_PROBE_STATES};

#[derive(Parser)]
#[command(name = "feller", version, about = "Simulate Feller processes built from Lévy families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Starting point
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<f64>,
    /// Horizon
    #[arg(long = "T", allow_negative_numbers = true)]
    horizon: Option<f64>,
    /// Time step
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of paths
    #[arg(long)]
    paths: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            x0: self.x0,
            horizon: self.horizon,
            h: self.h,
            seed: self.seed,
            paths: self.paths,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// List presets, Lévy processes, function presets and figures
    List,
    /// Simulate paths and write CSV, manifest and config
    Simulate {
        /// Config file or preset name
        #[arg(long)]
        config: String,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Check a family and probe its increment laws
    Validate {
        /// Config file or preset name
        #[arg(long)]
        config: String,
        #[command(flatten)]
        run: RunArgs,
        /// Comma separated states for the increment checks
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        probe_states: Option<Vec<f64>>,
        /// Exit with status 2 when any check warns
        #[arg(long)]
        strict: bool,
    },
    /// Regenerate the data of figure 1 to 4
    Figure {
        id: u8,
        /// Config file or preset name replacing the figure's family
        #[arg(long)]
        config: Option<String>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> feller::Result<i32> {
    match cli.command {
        Command::List => {
            print!("{}", cli::list_text());
            Ok(0)
        }
        Command::Simulate { config, run, out_dir } => {
            let cfg = cli::load_config(&config)?;
            let out = cli::simulate(&cfg, &run.overrides(), &out_dir)?;
            report_run(&out);
            Ok(0)
        }
        Command::Validate {
            config,
            run,
            probe_states,
            strict,
        } => {
            let cfg = cli::load_config(&config)?;
            let states = probe_states.unwrap_or_else(|| DEFAULT_PROBE_STATES.to_vec());
            let out = cli::validate(&cfg, &run.overrides(), &states)?;
            print!("{}", out.text);
            Ok(out.exit_code(strict))
        }
        Command::Figure {
            id,
            config,
            run,
            out_dir,
        } => {
            let cfg = config.as_deref().map(cli::load_config).transpose()?;
            let out = cli::figure(id, cfg.as_ref(), &run.overrides(), &out_dir)?;
            report_run(&out);
            Ok(0)
        }
    }
}

fn report_run(out: &cli::RunOutput) {
    println!(
        "wrote {} paths to {} (config hash {})",
        out.manifest.n_paths,
        out.paths_file.display(),
        out.manifest.config_hash
    );
    for t in &out.manifest.truncated {
        eprintln!(
            "warning: path {} overflowed at step {} (t={}); truncated",
            t.path_id, t.step, t.time
        );
    }
    if !out.manifest.validation.ok {
        for n in &out.manifest.validation.notes {
            eprintln!("warning: {n}");
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
