fn main() {
    std::process::exit(affine_euler::cli::run(std::env::args_os()));
}
