fn main() {
    std::process::exit(geolatnet::cli::main());
}
