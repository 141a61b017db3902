fn main() {
    std::process::exit(pgnn::cli::run());
}
