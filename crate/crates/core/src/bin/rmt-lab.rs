use clap::Parser;

fn main() {
    std::process::exit(rmt_lab::cli::run(rmt_lab::cli::Cli::parse()));
}
