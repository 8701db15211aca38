fn main() {
    std::process::exit(gasket_qw::cli::run(std::env::args_os()));
}
