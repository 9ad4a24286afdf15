fn main() {
    std::process::exit(oval::cli::dispatch(std::env::args_os().collect()));
}
