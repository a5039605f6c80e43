fn main() {
    std::process::exit(peeksched::cli::main());
}
