fn main() {
    std::process::exit(hgforge::cli::run());
}
