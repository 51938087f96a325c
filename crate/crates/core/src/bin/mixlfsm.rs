use clap::Parser;

fn main() {
    let cli = mixlfsm::cli::Cli::parse();
    std::process::exit(mixlfsm::cli::run(cli));
}
