fn main() {
    std::process::exit(semiquant_cli::app::main_with(std::env::args_os()));
}
