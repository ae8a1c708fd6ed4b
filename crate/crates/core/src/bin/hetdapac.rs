fn main() {
    std::process::exit(hetdapac::cli::main_with_args());
}
