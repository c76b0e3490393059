fn main() {
    std::process::exit(frtb_ima::cli::main());
}
