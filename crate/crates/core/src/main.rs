fn main() {
    std::process::exit(tmd_coreset::cli::run(std::env::args_os()));
}
