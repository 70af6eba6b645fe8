use clap::Parser;

fn main() -> std::process::ExitCode {
    cbs_core::cli::main_with(cbs_core::cli::Args::parse())
}
