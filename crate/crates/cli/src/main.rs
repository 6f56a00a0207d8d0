fn main() {
    std::process::exit(bgmem_cli::run(std::env::args_os()));
}
