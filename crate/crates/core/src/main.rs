fn main() {
    std::process::exit(dualcam::cli::run(std::env::args_os()));
}
