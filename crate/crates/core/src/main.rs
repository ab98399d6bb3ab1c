fn main() {
    std::process::exit(regime_lq::cli::run(std::env::args_os()));
}
