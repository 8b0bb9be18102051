fn main() {
    if let Err(e) = sdl_cli::run(std::env::args_os()) {
        eprintln!("{}", e.line());
        std::process::exit(e.kind.exit_code());
    }
}
