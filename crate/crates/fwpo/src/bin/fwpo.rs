fn main() {
    std::process::exit(fwpo::harness::cli(std::env::args_os()));
}
