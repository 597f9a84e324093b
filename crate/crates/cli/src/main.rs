use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vmstab::config::{config_reference, RunConfig};
use vmstab::run::{run, write_error, Command, RunOptions};

#[derive(Parser)]
#[command(name = "vmstab", version, about = "Linear stability of 1.5D Vlasov-Maxwell equilibria")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Report directory; defaults to `output` from the configuration, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Fourier-diagonal shortcut for homogeneous equilibria.
    #[arg(long)]
    fast_path: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the steady state and write it out.
    Equilibrium(Common),
    /// Reduced operator counts and the spectrum of the generator.
    Spectrum(Common),
    /// Time evolution with growth diagnostics.
    Evolve(Common),
    /// Structural checks and invariant suite.
    Verify(Common),
    /// Spectrum reports over a parameter range.
    Sweep(Common),
    /// Print the annotated reference configuration.
    ConfigReference,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::ConfigReference => {
            print!("{}", config_reference());
            return ExitCode::SUCCESS;
        }
        Cmd::Equilibrium(c) => (Command::Equilibrium, c),
        Cmd::Spectrum(c) => (Command::Spectrum, c),
        Cmd::Evolve(c) => (Command::Evolve, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
    };
    let loaded = RunConfig::load(&common.config);
    let out = common
        .out
        .clone()
        .or_else(|| loaded.as_ref().ok().and_then(|c| c.output.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let (cfg, result) = match loaded {
        Ok(cfg) => {
            let opts = RunOptions { out: out.clone(), fast_path: common.fast_path, threads: common.threads };
            let r = run(&cfg, cmd, &opts);
            (Some(cfg), r)
        }
        Err(e) => (None, Err(e)),
    };
    match result {
        Ok(o) => {
            println!("{}", o.summary);
            for f in &o.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match write_error(&out, Some(cmd), cfg.as_ref(), &e) {
                Ok(p) => eprintln!("wrote {}", p.display()),
                Err(w) => eprintln!("could not write error report: {w}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
