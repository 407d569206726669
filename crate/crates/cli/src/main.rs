fn main() {
    std::process::exit(regimecast_cli::run(std::env::args_os()));
}
