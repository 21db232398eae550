use clap::Parser;

use hdiv_stokes::cli::{run, Args};
use hdiv_stokes::Error;

fn main() {
    let args = Args::parse();
    match run(&args) {
        Ok(table) => print!("{table}"),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}
