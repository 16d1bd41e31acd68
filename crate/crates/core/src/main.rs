fn main() {
    std::process::exit(mmd_fuse::cli::run(std::env::args_os()));
}
