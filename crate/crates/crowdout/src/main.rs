fn main() {
    crowdout::cli::run();
}
