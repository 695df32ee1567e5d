fn main() {
    std::process::exit(dystil::harness::cli(std::env::args_os()));
}
