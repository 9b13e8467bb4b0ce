fn main() -> std::process::ExitCode {
    sepprob::cli::main()
}
