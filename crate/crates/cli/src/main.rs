use clap::Parser;

fn main() {
    let cli = dcae_cli::Cli::parse();
    let stdout = std::io::stdout();
    if let Err(e) = dcae_cli::run(&cli, &mut stdout.lock()) {
        eprintln!("dcae: {e}");
        std::process::exit(e.exit_code());
    }
}
