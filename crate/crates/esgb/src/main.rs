fn main() {
    std::process::exit(esgb::cli::run());
}
