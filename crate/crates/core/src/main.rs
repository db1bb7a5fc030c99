use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dynwalk::cli::{run_script, run_selftest};

#[derive(Parser)]
#[command(name = "dynwalk", version, about = "Dynamic random-walk powers and expansion testing")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a script and print its transcript.
    Run {
        /// Script file; stdin when omitted.
        file: Option<PathBuf>,
    },
    /// Run the embedded invariant suites.
    Selftest,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.command {
        Cmd::Run { file } => {
            let input = match file {
                Some(path) => std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display())),
                None => {
                    let mut s = String::new();
                    std::io::stdin().read_to_string(&mut s).map(|_| s).map_err(|e| e.to_string())
                }
            };
            let input = match input {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("dynwalk: {e}");
                    return ExitCode::from(1);
                }
            };
            let transcript = run_script(&input);
            print!("{}", transcript.text());
            if transcript.parse_failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Cmd::Selftest => {
            let report = run_selftest();
            print!("{}", report.text());
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
    }
}
