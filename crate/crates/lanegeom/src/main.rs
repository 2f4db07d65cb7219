fn main() {
    std::process::exit(lanegeom::cli::run());
}
