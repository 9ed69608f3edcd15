fn main() -> std::process::ExitCode {
    nlms::cli::main()
}
