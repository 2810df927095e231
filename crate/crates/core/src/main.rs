fn main() {
    std::process::exit(eqprice::cli::run(std::env::args_os()));
}
