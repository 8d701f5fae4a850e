fn main() {
    std::process::exit(epr_lattice::cli::main_with_args(std::env::args_os()));
}
