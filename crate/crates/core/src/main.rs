fn main() -> std::process::ExitCode {
    qutrit::cli::run(std::env::args_os())
}
