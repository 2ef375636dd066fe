fn main() {
    std::process::exit(mzweak::app::main_with_args(std::env::args_os()));
}
