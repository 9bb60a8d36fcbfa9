use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ehrenfest_lab::config::{parse_hbar_list, Scenario, TimeSpec};
use ehrenfest_lab::{run, sweep, validate, CliError, ExperimentConfig, Level, Mode, Overrides};

#[derive(Parser)]
#[command(name = "ehrenfest-lab", version, about = "Coherent-state dynamics experiments near hyperbolic points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario at a single hbar.
    Run(Common),
    /// Run a diagnostic over an hbar list and fit its power law.
    Sweep(Common),
    /// Report warnings and errors without running.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// dilation, double-well, harmonic or free.
    #[arg(long)]
    scenario: Option<String>,
    /// One value or a comma-separated list.
    #[arg(long)]
    hbar: Option<String>,
    /// A time or half-ehrenfest, ehrenfest, two-ehrenfest.
    #[arg(long)]
    t_final: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
                ExperimentConfig::from_json(&text)?
            }
            None => match &self.scenario {
                Some(s) => ExperimentConfig::preset(Scenario::parse(s)?),
                None => return Err(CliError::Config("either --config or --scenario is required".into())),
            },
        };
        let overrides = Overrides {
            scenario: self.scenario.as_deref().map(Scenario::parse).transpose()?,
            hbar: self.hbar.as_deref().map(parse_hbar_list).transpose()?,
            t_final: self.t_final.as_deref().map(TimeSpec::parse).transpose()?,
            seed: self.seed,
            out: self.out.clone(),
        };
        Ok(overrides.apply(base))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => c.load().and_then(|cfg| run(&cfg)).map(|m| println!("{}", m.config.output_dir.display())),
        Command::Sweep(c) => c.load().and_then(|cfg| sweep(&cfg)).map(|m| {
            for (name, summary) in &m.summaries {
                println!("{name}: {summary}");
            }
        }),
        Command::Validate(c) => c.load().and_then(|cfg| {
            let mode = if cfg.hbar.values().len() > 1 { Mode::Sweep } else { Mode::Run };
            let findings = validate(&cfg, mode);
            for f in &findings {
                println!("{f}");
            }
            let errors = findings.iter().filter(|f| f.level == Level::Error).count();
            if errors > 0 {
                Err(CliError::Config(format!("{errors} error(s)")))
            } else {
                Ok(())
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
