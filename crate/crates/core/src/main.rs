use clap::Parser;

use via_eh::cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    let code = run(Cli::parse())?;
    std::process::exit(code);
}
