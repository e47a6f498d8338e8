use clap::Parser;
use frachs_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
        }
        Err(e) => {
            eprintln!("frachs {}: {e}", cli.command.name());
            std::process::exit(e.exit_code());
        }
    }
}
