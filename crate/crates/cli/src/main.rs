fn main() -> std::process::ExitCode {
    needlet_cli::main_with_args(std::env::args_os().collect())
}
