fn main() {
    std::process::exit(smote_cls::cli::run(std::env::args_os()));
}
