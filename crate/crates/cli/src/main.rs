fn main() {
    std::process::exit(slicevis_cli::run(std::env::args_os()));
}
