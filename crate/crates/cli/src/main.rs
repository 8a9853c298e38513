use clap::Parser;

fn main() {
    let cli = rrl_cli::args::Cli::parse();
    if let Err(e) = rrl_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
