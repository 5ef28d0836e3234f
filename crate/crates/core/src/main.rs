fn main() {
    std::process::exit(chord_spectra::cli::run(std::env::args_os()));
}
