use clap::Parser;

fn main() {
    std::process::exit(alet_cli::run(alet_cli::Cli::parse()));
}
