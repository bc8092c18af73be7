fn main() {
    std::process::exit(acd_core::cli::run());
}
