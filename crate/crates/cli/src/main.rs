use clap::Parser;
use metainf_cli::commands::{error_json, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            if !out.is_empty() {
                println!("{out}");
            }
        }
        Err(e) => {
            if let Some(body) = error_json(&e) {
                println!("{body}");
            }
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
