fn main() {
    std::process::exit(reconf_cli::run_main(std::env::args_os()));
}
