fn main() {
    std::process::exit(layerscope::cli::run(std::env::args_os()));
}
