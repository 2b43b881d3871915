fn main() {
    std::process::exit(peer_ocp::cli::run(std::env::args_os().collect()));
}
