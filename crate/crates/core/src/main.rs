fn main() {
    std::process::exit(valmpc::cli::run_from_env());
}
