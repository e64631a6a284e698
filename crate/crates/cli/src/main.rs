use clap::Parser;

fn main() {
    std::process::exit(bdps_cli::run(bdps_cli::Cli::parse()));
}
