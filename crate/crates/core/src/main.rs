fn main() {
    std::process::exit(humandet::cli::run());
}
