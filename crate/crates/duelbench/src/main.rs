fn main() {
    let result = duelbench::cli::execute(std::env::args_os());
    if !result.message.is_empty() {
        eprintln!("{}", result.message);
    }
    std::process::exit(result.exit_code);
}
