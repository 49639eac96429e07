fn main() {
    // Piping output into a pager that exits early must kill the process
    // quietly, as with any other command line filter.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    // Log filtering comes from DFAS_LOG so RUST_LOG settings of a host
    // process never leak in.
    env_logger::Builder::from_env(env_logger::Env::new().filter("DFAS_LOG")).init();
    std::process::exit(dfas_cli::run());
}
