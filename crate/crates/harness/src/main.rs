//! `scwb`: runs one experiment from a config file or a built-in preset.

use clap::Parser;
use harness::{presets, EXIT_CONFIG};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "scwb", version, about = "Semiclassical mean-field workbench")]
struct Cli {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset", required_unless_present_any = ["preset", "list_presets"])]
    config: Option<PathBuf>,
    /// Built-in preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Worker threads for independent sweep members.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    /// Artifact directory (default `runs/<name>`).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Prints the preset names and exits.
    #[arg(long)]
    list_presets: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.list_presets {
        for (name, criterion, _) in presets::PRESETS {
            println!("{name}\tcriterion {criterion}");
        }
        return ExitCode::SUCCESS;
    }
    let src = match (&cli.config, &cli.preset) {
        (Some(path), _) => match std::fs::read_to_string(path) {
            Ok(s) => s,
            Err(e) => return fail(&format!("cannot read {}: {e}", path.display())),
        },
        (None, Some(name)) => match presets::preset(name) {
            Some(s) => s.to_string(),
            None => return fail(&format!("unknown preset '{name}' (see --list-presets)")),
        },
        (None, None) => return fail("one of --config or --preset is required"),
    };
    let cfg = match harness::load(&src, cli.seed, cli.output.clone()) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&format!("config error: {e}")),
    };
    let result = harness::run(&cfg, cli.jobs as usize);
    match &result {
        Ok(out) => {
            for check in &out.summary.checks {
                println!("{}: {:?} (value {:e}, band {})", check.name, check.status, check.value, check.band);
            }
            println!("{}: {} -> {}", cfg.name, if out.summary.pass { "pass" } else { "band failure" }, harness::output_dir(&cfg).display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(harness::exit_code(&result) as u8)
}

fn fail(message: &str) -> ExitCode {
    eprintln!("{message}");
    ExitCode::from(EXIT_CONFIG as u8)
}
