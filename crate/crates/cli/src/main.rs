use clap::Parser;

fn main() {
    let cli = qshared_cli::Cli::parse();
    if let Err(e) = qshared_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
