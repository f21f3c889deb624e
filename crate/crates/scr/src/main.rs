fn main() {
    std::process::exit(scr::cli::run(std::env::args()));
}
