fn main() {
    std::process::exit(swipt_cli::run(std::env::args_os()));
}
