use clap::Parser;

use continest_cli::{run, Cli};

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    if let Err(e) = run(cli, &argv) {
        eprintln!("continest: error: {e:#}");
        std::process::exit(e.exit_code());
    }
}
