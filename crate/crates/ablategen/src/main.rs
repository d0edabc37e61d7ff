fn main() {
    std::process::exit(ablategen::cli::run());
}
