use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wucb::cli::{self, Preset, PresetOptions};
use wucb::error::Result;

#[derive(Parser)]
#[command(name = "wucb", version, about = "Linear bandits with diverse user preferences")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Directory for relative output paths.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run one of the built-in synthetic experiments (fig1a, fig1b, fig1c).
    Preset {
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = cli::PRESET_HORIZON)]
        horizon: u64,
        #[arg(long, default_value_t = cli::DEFAULT_PATHS)]
        paths: usize,
    },
    /// Print the bound report for a config's instance and horizon.
    Bounds {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(args: Args) -> Result<()> {
    match args.command {
        Command::Simulate { config, out_dir } => {
            let config = cli::parse_config(&std::fs::read_to_string(config)?)?;
            for path in cli::simulate(&config, out_dir.as_deref())? {
                println!("{}", path.display());
            }
        }
        Command::Preset {
            name,
            seed,
            out_dir,
            horizon,
            paths,
        } => {
            let preset: Preset = name.parse()?;
            let options = PresetOptions {
                horizon,
                paths,
                ..PresetOptions::default()
            };
            let out = cli::run_preset(preset, seed, &out_dir, &options)?;
            for path in out.files {
                println!("{}", path.display());
            }
        }
        Command::Bounds { config } => {
            let config = cli::parse_config(&std::fs::read_to_string(config)?)?;
            let out = cli::bounds_for_config(&config)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
