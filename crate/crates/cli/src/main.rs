use clap::Parser;
use lqar_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.to_json());
            e.code
        }
    };
    std::process::exit(code);
}
