fn main() -> std::process::ExitCode {
    relight::cli::main_with_args(std::env::args_os())
}
