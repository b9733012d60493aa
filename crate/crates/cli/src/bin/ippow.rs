//! `ippow solve <poly-file> --d <int>`

use clap::{Parser, Subcommand};
use ip1s_cli::{cmd_ippow, exit_code, PowArgs};

#[derive(Parser)]
#[command(name = "ippow", version, about = "Isomorphism of polynomials against (x_1^d, ..., x_n^d)")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Find (A, B) with B·POW(Ax) = g
    Solve(PowArgs),
}

fn main() {
    let Cli { cmd: Cmd::Solve(a) } = Cli::parse();
    std::process::exit(exit_code(cmd_ippow(&a)));
}
