use clap::Parser;

fn main() {
    let cli = netml::cli::Cli::parse();
    if let Err(err) = netml::cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(netml::cli::exit_code(&err));
    }
}
