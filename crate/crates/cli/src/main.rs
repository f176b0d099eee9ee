mod config;
mod run;

use clap::Parser;

use crate::config::{Cli, Command};

// Exit codes: 0 success, 1 identity failure (check), 2 config/parse error,
// 3 integration blow-up or chart exit.
fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Geodesic(args) => run::dispatch(args, run::Kind::Geodesic),
        Command::Gchs(args) => run::dispatch(args, run::Kind::Gchs),
        Command::Check(args) => run::dispatch(args, run::Kind::Check),
    };
    std::process::exit(code);
}
