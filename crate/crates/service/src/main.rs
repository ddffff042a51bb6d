fn main() {
    std::process::exit(ordlog_service::cli::main());
}
