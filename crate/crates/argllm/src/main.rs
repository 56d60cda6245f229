fn main() {
    std::process::exit(argllm::cli::run(std::env::args_os()));
}
