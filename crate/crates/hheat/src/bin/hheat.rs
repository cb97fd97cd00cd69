fn main() {
    // placeholder while the library is under construction
    eprintln!("hheat CLI not wired yet");
    std::process::exit(2);
}
