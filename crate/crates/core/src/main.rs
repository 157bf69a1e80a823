fn main() {
    std::process::exit(linesource::cli::run_main());
}
