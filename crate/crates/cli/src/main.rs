use clap::Parser;

fn main() {
    let cli = ip1s_cli::Cli::parse();
    std::process::exit(ip1s_cli::exit_code(ip1s_cli::run(&cli)));
}
