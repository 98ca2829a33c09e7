use clap::Parser;

fn main() {
    let cli = finsler_lab::cli::Cli::parse();
    std::process::exit(finsler_lab::cli::run(&cli));
}
