use clap::Parser;

fn main() {
    let cli = popcode_cli::Cli::parse();
    if let Err(e) = popcode_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
