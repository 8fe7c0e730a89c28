//! Binary entry point: parses the command line and reports failures as a
//! one-line diagnostic with a nonzero exit code.

use clap::Parser;

fn main() {
    let cli = dducb::cli::Cli::parse();
    if let Err(err) = dducb::cli::execute(&cli) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
