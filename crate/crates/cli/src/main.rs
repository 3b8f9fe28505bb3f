use born_cli::config::Tolerances;
use born_cli::{exit_code, load_config, pipeline, RunConfig, RunResult};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "born", version, about = "Born series scattering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the potential or medium, store it and certify its support.
    MakePotential(Common),
    /// Full pipeline over the k sweep.
    Run(Common),
    /// Reports only, from fields stored by make-potential.
    Verify(Common),
    /// Small-grid cross-checks against the quadrature references.
    Oracle(Common),
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// One tolerance for every check, overriding the config.
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for the oracle's random momenta.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Common {
    fn load(&self) -> RunResult<RunConfig> {
        let mut cfg = load_config(&self.config)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(t) = self.tol {
            cfg.tolerances = Tolerances::uniform(t);
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::MakePotential(c) => c.load().and_then(|cfg| pipeline::make_potential(&cfg)),
        Command::Run(c) => c.load().and_then(|cfg| pipeline::run(&cfg)),
        Command::Verify(c) => c.load().and_then(|cfg| pipeline::verify(&cfg)),
        Command::Oracle(c) => c.load().and_then(|cfg| pipeline::oracle(&cfg, c.seed)),
    };
    match &result {
        Ok(o) => {
            for l in &o.lines {
                println!("{l}");
            }
            for f in &o.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
