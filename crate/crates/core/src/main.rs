fn main() {
    std::process::exit(l2torsion::cli::main_with_args(std::env::args_os()));
}
