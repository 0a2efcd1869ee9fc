fn main() {
    std::process::exit(bifront::cli::main_entry());
}
