use clap::Parser;

fn main() {
    let args = minimaxkern::cli::Args::parse();
    std::process::exit(minimaxkern::cli::main_with_args(args));
}
