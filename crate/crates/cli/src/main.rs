use clap::Parser;

fn main() {
    let cli = ensemblefuse_cli::Cli::parse();
    if let Err(err) = ensemblefuse_cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.code);
    }
}
