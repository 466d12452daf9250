fn main() -> std::process::ExitCode {
    raccess::cli::main_entry()
}
