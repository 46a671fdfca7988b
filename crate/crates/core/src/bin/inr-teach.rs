fn main() -> std::process::ExitCode {
    inr_teach::cli::run(std::env::args_os())
}
