fn main() {
    std::process::exit(twosided::cli::main());
}
