use clap::Parser;
use dronenet_cli::{run, Cli};

fn main() {
    let code = run(Cli::parse(), std::env::vars());
    std::process::exit(code);
}
