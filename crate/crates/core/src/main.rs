fn main() {
    std::process::exit(dicke_core::app::run(std::env::args_os()));
}
