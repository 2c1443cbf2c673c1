fn main() {
    std::process::exit(hybridsim_cli::main_entry(std::env::args_os()));
}
