fn main() {
    std::process::exit(sepdp::cli::run(std::env::args_os()));
}
