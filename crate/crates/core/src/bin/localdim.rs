fn main() {
    std::process::exit(localdim::cli::run(std::env::args_os()));
}
