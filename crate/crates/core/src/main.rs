use clap::Parser;

fn main() {
    env_logger::init();
    let args = lipretract::cli::Args::parse();
    std::process::exit(lipretract::cli::main_with(args));
}
