fn main() {
    match varcheck::cli::parse_args(std::env::args_os().skip(1)) {
        Ok(request) => std::process::exit(varcheck::cli::execute(&request)),
        // Usage errors exit 2; --help exits 0. clap handles both.
        Err(err) => err.exit(),
    }
}
