fn main() {
    std::process::exit(bioatm::cli::main_from(std::env::args_os().collect()));
}
