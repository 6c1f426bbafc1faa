fn main() {
    std::process::exit(hermite_l1::cli::run(std::env::args_os()));
}
