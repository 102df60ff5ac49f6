fn main() -> std::process::ExitCode {
    thc::cli::main()
}
