use clap::Parser;

fn main() {
    let cli = gsc_lab::cli::Cli::parse();
    match gsc_lab::cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
