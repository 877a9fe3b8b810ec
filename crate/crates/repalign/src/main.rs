fn main() {
    std::process::exit(repalign::cli::main());
}
