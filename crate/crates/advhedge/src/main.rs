fn main() {
    std::process::exit(advhedge::main_with(std::env::args_os()));
}
