use clap::Parser;

fn main() {
    let cli = qvrp::cli::Cli::parse();
    if let Err(err) = qvrp::cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
