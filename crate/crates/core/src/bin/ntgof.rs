fn main() {
    std::process::exit(ntgof::cli::main_with_args(std::env::args_os()));
}
