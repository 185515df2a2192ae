use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qflow_core::morse_gate::MorseOptions;
use qflow_core::workbench::{cmd_check_f, cmd_normalize, cmd_run, cmd_selftest, RunConfig, SelftestOptions};

#[derive(Parser)]
#[command(name = "qflow", version, about = "Prescribed Q-curvature flow laboratory on S^4")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow described by a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides out_dir from the config
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the existence criterion for a prescribed function
    CheckF {
        #[arg(long = "f")]
        f: String,
    },
    /// Move a snapshot into the zero center-of-mass gauge
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in checks
    Selftest {
        #[arg(long, default_value_t = 16)]
        band_limit: usize,
        #[arg(long, hide = true)]
        debug_corrupt_ordering: bool,
    },
}

fn configure_threads() {
    if let Some(n) = std::env::var("QFLOW_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    configure_threads();
    let (mut out, mut err) = (io::stdout(), io::stderr());
    let code = match cli.command {
        Command::Run { config, out: dir } => match RunConfig::load(&config) {
            Ok(mut c) => {
                if let Some(d) = dir {
                    c.out_dir = d;
                }
                cmd_run(&c, &mut out, &mut err)
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Command::CheckF { f } => cmd_check_f(&f, &MorseOptions::default(), &mut out, &mut err),
        Command::Normalize { input, out: dest } => cmd_normalize(&input, &dest, &mut out, &mut err),
        Command::Selftest { band_limit, debug_corrupt_ordering } => cmd_selftest(
            SelftestOptions { band_limit, corrupt_ordering: debug_corrupt_ordering },
            &mut out,
            &mut err,
        ),
    };
    ExitCode::from(code as u8)
}
