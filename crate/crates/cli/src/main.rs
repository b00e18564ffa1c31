fn main() {
    std::process::exit(kleinsplit_cli::main_with(std::env::args_os()));
}
