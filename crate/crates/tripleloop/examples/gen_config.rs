// temporary generator
fn main() {
    let config = tripleloop::harness::config::Config::default();
    let text = serde_json::to_string_pretty(&config).unwrap();
    std::fs::create_dir_all("config").unwrap();
    std::fs::write("config/default.json", text + "\n").unwrap();
    println!("wrote config/default.json");
}
