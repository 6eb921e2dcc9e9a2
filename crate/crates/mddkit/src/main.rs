fn main() -> std::process::ExitCode {
    mddkit::cli::run()
}
