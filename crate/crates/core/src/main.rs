fn main() {
    std::process::exit(evalplan::cli::dispatch(std::env::args_os()));
}
