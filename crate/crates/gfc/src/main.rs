fn main() {
    std::process::exit(gfc::cli::run());
}
