fn main() {
    std::process::exit(wecs::cli::main());
}
