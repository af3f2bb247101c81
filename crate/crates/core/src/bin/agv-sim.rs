fn main() {
    std::process::exit(agv_sim::cli::main());
}
