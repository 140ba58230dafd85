fn main() {
    std::process::exit(scf::cli::run(std::env::args_os()));
}
