fn main() {
    std::process::exit(perturbed_orbits::cli::run(std::env::args().skip(1)));
}
