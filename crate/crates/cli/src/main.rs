use clap::Parser;
use mcpca_cli::commands::{run, Cli};

fn main() {
    if let Err(failure) = run(Cli::parse()) {
        eprintln!("error: {failure}");
        std::process::exit(failure.code);
    }
}
