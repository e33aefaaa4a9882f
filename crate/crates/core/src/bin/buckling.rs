fn main() {
    std::process::exit(buckling_eigen::cli::run(std::env::args()));
}
