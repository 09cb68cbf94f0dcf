fn main() {
    std::process::exit(geneo_pocket::cli::run(std::env::args_os()));
}
