fn main() -> std::process::ExitCode {
    topicshift::cli::main()
}
