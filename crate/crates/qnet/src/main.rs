use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qnet::run::{run, Format, Verb};
use qnet::scenario::parse_scenario;

#[derive(Parser)]
#[command(name = "qnet", about = "Entanglement-based quantum network simulator")]
struct Cli {
    #[command(subcommand)]
    verb: Command,
    /// Scenario file (required for every verb except `costs`)
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Override the scenario's RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Compare the rendered report byte-for-byte against this file
    #[arg(long, global = true)]
    golden: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = CliFormat::Text)]
    format: CliFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Storage-cost table over the standard client/switch grid
    Costs,
    /// Route a joint GHZ state across the scenario's router regions
    Route,
    /// Device-failure drills against each network's reliability layout
    Drill,
    /// Fulfil the scenario's requests end to end
    E2e,
    /// Stabilizer verification of each network's GHZ state
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliFormat {
    Text,
    Records,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verb = match cli.verb {
        Command::Costs => Verb::Costs,
        Command::Route => Verb::Route,
        Command::Drill => Verb::Drill,
        Command::E2e => Verb::E2e,
        Command::Verify => Verb::Verify,
    };
    let scenario = match &cli.scenario {
        None => None,
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::FAILURE;
                }
            };
            match parse_scenario(&text) {
                Ok(mut s) => {
                    if let Some(seed) = cli.seed {
                        s.seed = seed;
                    }
                    Some(s)
                }
                Err(issues) => {
                    for i in issues {
                        eprintln!("{}:{}: {}", path.display(), i.line, i.message);
                    }
                    return ExitCode::FAILURE;
                }
            }
        }
    };
    let format = match cli.format {
        CliFormat::Text => Format::Text,
        CliFormat::Records => Format::Records,
    };
    let report = match run(verb, scenario.as_ref()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let rendered = report.render(format);
    print!("{rendered}");
    let mut ok = report.ok;
    if let Some(golden) = &cli.golden {
        match std::fs::read_to_string(golden) {
            Ok(want) if want == rendered => {}
            Ok(_) => {
                eprintln!("error: output differs from {}", golden.display());
                ok = false;
            }
            Err(e) => {
                eprintln!("error: {}: {e}", golden.display());
                ok = false;
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
