use clap::Parser;
use meanrev_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(manifest) => println!("{}", manifest.display()),
        Err(e) => {
            eprintln!("{}", e.record());
            eprintln!("{} failed: {}", cli.command.name(), e.message);
            std::process::exit(e.code as i32);
        }
    }
}
