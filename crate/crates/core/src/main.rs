fn main() -> std::process::ExitCode {
    enaqt::cli::main()
}
