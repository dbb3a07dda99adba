fn main() {
    std::process::exit(mobius_knot::cli::run(std::env::args_os()));
}
